"""Restricted switching systems and finite switching laws.

A restricted system runs ``x' = A_j x`` in mode ``j`` for a duration in
``[m_j, M_j]`` and must then switch to a different mode. Modes are indexed
from 0 in Python; the JSON law format uses 1-based indices.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .numlin import as_matrix, expm, log_spectral_radius

__all__ = [
    "SystemFormatError",
    "RestrictedSystem",
    "FiniteSwitchingLaw",
    "ModeProduct",
    "Trajectory",
    "is_admissible",
    "is_periodizable",
    "product",
    "law_lower_bound",
    "simulate",
    "system_from_dict",
    "system_to_dict",
    "load_system",
    "save_system",
    "law_from_json",
    "law_to_json",
]

# relative slack when comparing leg durations with [m_j, M_j]
_DURATION_RTOL = 1e-12


class SystemFormatError(ValueError):
    """Malformed system or law description."""


@dataclass(frozen=True, eq=False)
class RestrictedSystem:
    """Matrices ``A_1..A_n`` with per-mode switching intervals ``[m_j, M_j]``.

    ``upper`` entries may be ``math.inf`` (no upper restriction).
    """

    modes: tuple
    lower: tuple
    upper: tuple

    def __post_init__(self):
        modes = tuple(as_matrix(A) for A in self.modes)
        if not modes:
            raise ValueError("a system needs at least one mode")
        d = modes[0].shape[0]
        if any(A.shape != (d, d) for A in modes):
            raise ValueError("all modes must share the same dimension")
        lower = tuple(float(v) for v in self.lower)
        upper = tuple(float(v) for v in self.upper)
        if len(lower) != len(modes) or len(upper) != len(modes):
            raise ValueError("need one lower and one upper bound per mode")
        for j, (m, M) in enumerate(zip(lower, upper)):
            if not (math.isfinite(m) and m > 0):
                raise ValueError(f"mode {j}: lower bound must be finite and > 0, got {m}")
            if not M > m:
                raise ValueError(f"mode {j}: upper bound {M} must exceed lower bound {m}")
        for A in modes:
            A.setflags(write=False)
        object.__setattr__(self, "modes", modes)
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @classmethod
    def uniform(cls, modes: Sequence, m: float, M: float) -> "RestrictedSystem":
        """All modes share the segment ``[m, M]``."""
        n = len(modes)
        return cls(tuple(modes), (m,) * n, (M,) * n)

    @property
    def n(self) -> int:
        return len(self.modes)

    @property
    def d(self) -> int:
        return self.modes[0].shape[0]

    @property
    def finite_upper(self) -> bool:
        return all(math.isfinite(M) for M in self.upper)

    def shifted(self, alpha: float) -> "RestrictedSystem":
        """The system with matrices ``A_j - alpha I`` (exponent shifts by ``-alpha``)."""
        eye = np.eye(self.d)
        return RestrictedSystem(tuple(A - alpha * eye for A in self.modes), self.lower, self.upper)

    def with_upper(self, upper: Sequence[float]) -> "RestrictedSystem":
        return RestrictedSystem(self.modes, self.lower, tuple(upper))

    def is_metzler(self) -> bool:
        return all(np.all(A - np.diag(np.diag(A)) >= 0) for A in self.modes)

    def __repr__(self):
        return f"RestrictedSystem(n={self.n}, d={self.d}, lower={self.lower}, upper={self.upper})"


@dataclass(frozen=True)
class FiniteSwitchingLaw:
    """Ordered legs ``(mode, duration)``; mode indices are 0-based."""

    legs: tuple = ()

    def __post_init__(self):
        legs = tuple((int(j), float(s)) for j, s in self.legs)
        object.__setattr__(self, "legs", legs)

    @property
    def total_time(self) -> float:
        return float(sum(s for _, s in self.legs))

    @property
    def modes(self) -> tuple:
        return tuple(j for j, _ in self.legs)

    def __len__(self):
        return len(self.legs)

    def __add__(self, other: "FiniteSwitchingLaw") -> "FiniteSwitchingLaw":
        return FiniteSwitchingLaw(self.legs + other.legs)

    def rotated(self, k: int) -> "FiniteSwitchingLaw":
        """Cyclic rotation moving the first ``k`` legs to the end."""
        k %= max(len(self.legs), 1)
        return FiniteSwitchingLaw(self.legs[k:] + self.legs[:k])


@dataclass(frozen=True)
class ModeProduct:
    """The fundamental matrix ``Π(T)`` of a law and its duration ``T``."""

    matrix: np.ndarray
    total_time: float


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    switch_times: np.ndarray


def _check_indices(law: FiniteSwitchingLaw, sys: RestrictedSystem):
    for j, _ in law.legs:
        if not 0 <= j < sys.n:
            raise ValueError(f"mode index {j} out of range for a system with {sys.n} modes")


def is_admissible(law: FiniteSwitchingLaw, sys: RestrictedSystem) -> bool:
    """Every duration lies in its mode's segment and consecutive modes differ."""
    _check_indices(law, sys)
    prev = None
    for j, s in law.legs:
        m, M = sys.lower[j], sys.upper[j]
        if s < m * (1 - _DURATION_RTOL) or s > M * (1 + _DURATION_RTOL):
            return False
        if j == prev:
            return False
        prev = j
    return True


def is_periodizable(law: FiniteSwitchingLaw) -> bool:
    """Membership in the set of laws that begin and end with different modes."""
    return len(law.legs) >= 2 and law.legs[0][0] != law.legs[-1][0]


def product(law: FiniteSwitchingLaw, sys: RestrictedSystem) -> ModeProduct:
    """``Π = e^{s_k A_{j_k}} ... e^{s_1 A_{j_1}}`` (latest leg leftmost)."""
    _check_indices(law, sys)
    P = np.eye(sys.d)
    for j, s in law.legs:
        P = expm(sys.modes[j], s) @ P
    return ModeProduct(P, law.total_time)


def law_lower_bound(law: FiniteSwitchingLaw, sys: RestrictedSystem) -> float:
    """``T^{-1} ln ρ(Π(T))``, a lower bound for the Lyapunov exponent.

    Only laws that are admissible and begin and end with different modes
    can be repeated periodically, so only those are accepted.
    """
    if not is_admissible(law, sys):
        raise ValueError("law is not admissible for this system")
    if not is_periodizable(law):
        raise ValueError("law begins and ends with the same mode; it cannot be periodized")
    P = product(law, sys)
    return log_spectral_radius(P.matrix) / P.total_time


def simulate(law: FiniteSwitchingLaw, sys: RestrictedSystem, x0, sample_step: float) -> Trajectory:
    """Sample ``x(t) = Π(t) x0`` on a uniform grid plus every switching instant."""
    if sample_step <= 0:
        raise ValueError("sample_step must be positive")
    if not is_admissible(law, sys):
        raise ValueError("law is not admissible for this system")
    x = np.asarray(x0, dtype=float).ravel()
    if x.shape != (sys.d,):
        raise ValueError("initial state has the wrong dimension")
    times, states, switches = [0.0], [x.copy()], []
    t0 = 0.0
    for j, s in law.legs:
        A = sys.modes[j]
        t1 = t0 + s
        k0 = math.floor(t0 / sample_step) + 1
        grid = [k * sample_step for k in range(k0, math.ceil(t1 / sample_step) + 1)]
        grid = [g for g in grid if t0 < g < t1 and not math.isclose(g, t1, rel_tol=1e-12, abs_tol=1e-12)]
        for g in grid:
            times.append(g)
            states.append(expm(A, g - t0) @ x)
        x = expm(A, s) @ x
        times.append(t1)
        states.append(x.copy())
        switches.append(t1)
        t0 = t1
    return Trajectory(np.array(times), np.array(states), np.array(switches))


# --- JSON formats -----------------------------------------------------------

def _parse_bound(value, field: str):
    if isinstance(value, str):
        if value.strip().lower() in ("inf", "+inf", "infinity"):
            return math.inf
        raise SystemFormatError(f"{field}: expected a number or \"inf\", got {value!r}")
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SystemFormatError(f"{field}: expected a number, got {value!r}")
    return float(value)


def _parse_matrix(raw, field: str) -> np.ndarray:
    try:
        arr = np.array(raw, dtype=float)
    except (TypeError, ValueError) as exc:
        raise SystemFormatError(f"{field}: not a numeric matrix ({exc})") from None
    if arr.ndim == 1:
        d = int(round(math.sqrt(arr.size)))
        if d * d != arr.size or d == 0:
            raise SystemFormatError(f"{field}: flat entry list of length {arr.size} is not d*d")
        arr = arr.reshape(d, d)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise SystemFormatError(f"{field}: expected a square matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise SystemFormatError(f"{field}: non-finite entries")
    return arr


def system_from_dict(data: dict) -> RestrictedSystem:
    """Build a system from ``{"modes": [...], "lower": [...], "upper": [...]}``.

    Matrices may be nested row lists or flat row-major lists; upper bounds
    may be the string ``"inf"``.
    """
    if not isinstance(data, dict):
        raise SystemFormatError("top level: expected a JSON object")
    for key in ("modes", "lower", "upper"):
        if key not in data:
            raise SystemFormatError(f"missing field {key!r}")
    raw_modes = data["modes"]
    if not isinstance(raw_modes, list) or not raw_modes:
        raise SystemFormatError("modes: expected a nonempty list of matrices")
    modes = [_parse_matrix(A, f"modes[{k}]") for k, A in enumerate(raw_modes)]
    d = modes[0].shape[0]
    for k, A in enumerate(modes):
        if A.shape[0] != d:
            raise SystemFormatError(f"modes[{k}]: dimension {A.shape[0]} differs from modes[0] ({d})")
    n = len(modes)
    lower, upper = data["lower"], data["upper"]
    if isinstance(lower, (int, float)) and not isinstance(lower, bool):
        lower = [lower] * n
    if isinstance(upper, (int, float, str)) and not isinstance(upper, bool):
        upper = [upper] * n
    if not isinstance(lower, list) or len(lower) != n:
        raise SystemFormatError(f"lower: expected {n} entries")
    if not isinstance(upper, list) or len(upper) != n:
        raise SystemFormatError(f"upper: expected {n} entries")
    lo = [_parse_bound(v, f"lower[{k}]") for k, v in enumerate(lower)]
    up = [_parse_bound(v, f"upper[{k}]") for k, v in enumerate(upper)]
    try:
        return RestrictedSystem(tuple(modes), tuple(lo), tuple(up))
    except ValueError as exc:
        raise SystemFormatError(str(exc)) from None


def system_to_dict(sys: RestrictedSystem) -> dict:
    return {
        "modes": [A.tolist() for A in sys.modes],
        "lower": list(sys.lower),
        "upper": [M if math.isfinite(M) else "inf" for M in sys.upper],
    }


def load_system(path) -> RestrictedSystem:
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SystemFormatError(f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    return system_from_dict(data)


def save_system(sys: RestrictedSystem, path):
    with open(path, "w") as fh:
        json.dump(system_to_dict(sys), fh, indent=2)
        fh.write("\n")


def law_from_json(raw: Iterable) -> FiniteSwitchingLaw:
    """Parse ``[[j, s], ...]`` with 1-based mode indices."""
    legs = []
    try:
        for k, (j, s) in enumerate(raw):
            if isinstance(j, bool) or int(j) != j or j < 1:
                raise SystemFormatError(f"law[{k}]: mode index must be a positive integer, got {j!r}")
            legs.append((int(j) - 1, float(s)))
    except (TypeError, ValueError) as exc:
        if isinstance(exc, SystemFormatError):
            raise
        raise SystemFormatError(f"law: expected [[mode, duration], ...] ({exc})") from None
    return FiniteSwitchingLaw(tuple(legs))


def law_to_json(law: FiniteSwitchingLaw) -> list:
    return [[j + 1, s] for j, s in law.legs]
