"""Brute-force reference machinery.

Exhaustive enumeration of periodic switching laws on duration grids (each
gives a certified lower bound on the exponent), random growth sampling,
and a fixture whose best period length jumps as ``M`` varies.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from .numlin import expm, log_spectral_radius, spectral_abscissa
from .sysmodel import FiniteSwitchingLaw, RestrictedSystem

__all__ = [
    "PeriodicBound",
    "GrowthProbe",
    "duration_grids",
    "enumerate_laws",
    "best_periodic_lower_bound",
    "discontinuous_period_fixture",
    "growth_probe",
]


@dataclass(frozen=True)
class PeriodicBound:
    """Best lower bound found, the law realising it, and bookkeeping.

    ``exhaustive`` is False when the enumeration budget ran out.
    """

    value: float
    law: FiniteSwitchingLaw | None
    exhaustive: bool
    laws_evaluated: int


@dataclass(frozen=True)
class GrowthProbe:
    value: float
    short_horizon: bool
    samples: int


def duration_grids(sys: RestrictedSystem, points_per_mode: int | Sequence[Sequence[float]]) -> list[np.ndarray]:
    """Per-mode duration grids; both endpoints are always included."""
    if not sys.finite_upper:
        raise ValueError("duration grids need finite upper bounds")
    if isinstance(points_per_mode, int):
        if points_per_mode < 2:
            raise ValueError("need at least the two endpoints per mode")
        return [np.linspace(m, M, points_per_mode) for m, M in zip(sys.lower, sys.upper)]
    grids = []
    for j, g in enumerate(points_per_mode):
        g = np.unique(np.concatenate([np.asarray(g, dtype=float), [sys.lower[j], sys.upper[j]]]))
        if g[0] < sys.lower[j] or g[-1] > sys.upper[j]:
            raise ValueError(f"grid of mode {j} leaves [m, M]")
        grids.append(g)
    return grids


def _is_min_rotation(word: tuple) -> bool:
    return all(word <= word[k:] + word[:k] for k in range(1, len(word)))


def _mode_cycles(n: int, max_legs: int) -> Iterator[tuple]:
    """Mode sequences with distinct neighbours, first != last."""
    for k in range(2, max_legs + 1):
        for seq in itertools.product(range(n), repeat=k):
            if seq[0] != seq[-1] and all(a != b for a, b in zip(seq, seq[1:])):
                yield seq


def enumerate_laws(sys: RestrictedSystem, max_legs: int, grids) -> Iterator[tuple]:
    """Yield ``(law, word)`` for every periodic grid law up to cyclic rotation.

    ``word`` is the tuple of ``(mode, grid index)`` pairs. A law whose
    first and last modes differ stays so under every cyclic rotation, so
    only the lexicographically smallest rotation is emitted.
    """
    if max_legs < 2:
        return
    for modes in _mode_cycles(sys.n, max_legs):
        for idx in itertools.product(*(range(len(grids[j])) for j in modes)):
            word = tuple(zip(modes, idx))
            if not _is_min_rotation(word):
                continue
            yield FiniteSwitchingLaw(tuple((j, float(grids[j][i])) for j, i in word)), word


def best_periodic_lower_bound(
    sys: RestrictedSystem,
    max_legs: int = 2,
    grid_points_per_mode: int | Sequence[Sequence[float]] = 3,
    budget: int = 200_000,
) -> PeriodicBound:
    """Maximum of ``ln rho(Pi) / T`` over enumerated periodic grid laws."""
    grids = duration_grids(sys, grid_points_per_mode)
    exps = [[expm(A, s) for s in g] for A, g in zip(sys.modes, grids)]
    best, best_law, count = -math.inf, None, 0
    for law, word in enumerate_laws(sys, max_legs, grids):
        if count >= budget:
            return PeriodicBound(best, best_law, False, count)
        P = np.eye(sys.d)
        for j, i in word:
            P = exps[j][i] @ P
        value = log_spectral_radius(P) / law.total_time
        count += 1
        # strict improvement only: repeats of a shorter law lose ties
        if best_law is None or value > best + 1e-12 * max(1.0, abs(best)):
            best, best_law = value, law
    return PeriodicBound(best, best_law, True, count)


def discontinuous_period_fixture(a: float, M: float = 2 * math.pi) -> RestrictedSystem:
    """``A1 = diag(-1, -a)``, ``A2`` the rotation generator, ``m = pi``."""
    if not a > 1:
        raise ValueError("a must exceed 1")
    if not M > math.pi:
        raise ValueError("M must exceed pi")
    A1 = np.diag([-1.0, -float(a)])
    A2 = np.array([[0.0, -1.0], [1.0, 0.0]])
    return RestrictedSystem.uniform([A1, A2], math.pi, M)


def growth_probe(sys: RestrictedSystem, num_random_laws: int = 200, horizon: float = 50.0,
                 seed: int = 0) -> GrowthProbe:
    """Largest ``ln |Pi(t)|_2 / t`` over random admissible laws.

    Leg durations are uniform in ``[m_j, M_j]`` and the next mode is
    uniform among the others. This is an indicator, not a certificate.
    When ``horizon`` is shorter than every dwell time a single leg is all
    there is and the spectral abscissa of the first mode is returned.
    """
    if not sys.finite_upper:
        raise ValueError("growth probe needs finite upper bounds")
    rng = np.random.default_rng(seed)
    if horizon < min(sys.lower):
        starts = rng.integers(sys.n, size=num_random_laws)
        return GrowthProbe(max(spectral_abscissa(sys.modes[j]) for j in starts), True, num_random_laws)
    best = -math.inf
    for _ in range(num_random_laws):
        j = int(rng.integers(sys.n))
        P, t = np.eye(sys.d), 0.0
        log_scale = 0.0
        while t < horizon:
            s = float(rng.uniform(sys.lower[j], sys.upper[j]))
            P = expm(sys.modes[j], s) @ P
            t += s
            # keep the product normalised; track the scale in logs
            nrm = np.linalg.norm(P, 2)
            if nrm > 0:
                log_scale += math.log(nrm)
                P /= nrm
            others = [q for q in range(sys.n) if q != j]
            j = int(others[rng.integers(len(others))]) if others else j
        best = max(best, log_scale / t)
    return GrowthProbe(best, False, num_random_laws)
