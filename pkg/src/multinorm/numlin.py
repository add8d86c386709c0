"""Dense real matrix kernel.

Matrix exponentials, spectra, spectral abscissa/radius and a test for
common invariant subspaces of a finite matrix family.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.linalg

__all__ = [
    "as_matrix",
    "expm",
    "spectrum",
    "spectral_abscissa",
    "spectral_radius",
    "log_spectral_radius",
    "leading_schur_vector",
    "lognorm_bracket",
    "invariant_closure",
    "Irreducibility",
    "is_irreducible",
    "NearReducibleWarning",
]


class NearReducibleWarning(UserWarning):
    """The family is irreducible only by a thin numerical margin."""


def as_matrix(A) -> np.ndarray:
    """Return ``A`` as a finite square float array, or raise ``ValueError``."""
    A = np.array(A, dtype=float)
    if A.ndim == 0:
        A = A.reshape(1, 1)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] < 1:
        raise ValueError(f"expected a square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix has non-finite entries")
    return A


def expm(A, t: float = 1.0) -> np.ndarray:
    """Matrix exponential ``e^{tA}``.

    Scaling and squaring with a diagonal Padé approximant (LAPACK-backed
    implementation from SciPy). ``t = 0`` returns the identity exactly.

    Raises
    ------
    OverflowError
        If the result does not fit in double precision.
    """
    A = as_matrix(A)
    t = float(t)
    if not np.isfinite(t):
        raise ValueError("time must be finite")
    d = A.shape[0]
    if t == 0.0:
        return np.eye(d)
    with np.errstate(over="ignore", invalid="ignore"):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            E = scipy.linalg.expm(t * A)
    if not np.all(np.isfinite(E)):
        raise OverflowError(f"e^(tA) out of floating range (t={t}, |A|={np.linalg.norm(A):.3g})")
    return E


def spectrum(A) -> np.ndarray:
    """Eigenvalues of ``A`` with multiplicity (complex array of length d)."""
    return np.linalg.eigvals(as_matrix(A)).astype(complex)


def spectral_abscissa(A) -> float:
    """Largest real part of the eigenvalues of ``A``."""
    return float(np.max(spectrum(A).real))


def spectral_radius(P) -> float:
    """Largest modulus of the eigenvalues of ``P``."""
    return float(np.max(np.abs(spectrum(P))))


def log_spectral_radius(P) -> float:
    """``ln ρ(P)``; ``-inf`` for nilpotent input."""
    r = spectral_radius(P)
    return float(np.log(r)) if r > 0 else -np.inf


def leading_schur_vector(A) -> np.ndarray:
    """Unit vector spanning the leading real Schur direction of ``A``.

    The real Schur form is reordered so the eigenvalues with maximal real
    part come first; the first Schur vector then lies in their invariant
    subspace.
    """
    A = as_matrix(A)
    if A.shape[0] == 1:
        return np.ones(1)
    top = spectral_abscissa(A)
    tol = 1e-9 * max(1.0, abs(top))
    T, Z, _ = scipy.linalg.schur(A, output="real", sort=lambda re, im: re >= top - tol)
    v = Z[:, 0]
    # sign convention: largest-magnitude entry positive
    k = int(np.argmax(np.abs(v)))
    return v if v[k] >= 0 else -v


def lognorm_bracket(modes: Sequence[np.ndarray]) -> tuple[float, float]:
    """Euclidean logarithmic-norm bounds on any product growth rate.

    Every trajectory of ``x' = A(t)x`` with ``A(t)`` drawn from ``modes``
    satisfies ``e^{lo t}|x0| <= |x(t)| <= e^{hi t}|x0|``.
    """
    lo, hi = np.inf, -np.inf
    for A in modes:
        S = 0.5 * (A + A.T)
        w = np.linalg.eigvalsh(S)
        lo = min(lo, float(w[0]))
        hi = max(hi, float(w[-1]))
    return lo, hi


def _orth(W: np.ndarray, rtol: float) -> tuple[np.ndarray, float]:
    """Orthonormal basis of range(W) and the smallest kept relative singular value."""
    if W.size == 0:
        return W, 1.0
    U, s, _ = np.linalg.svd(W, full_matrices=False)
    if s[0] == 0:
        return U[:, :0], 1.0
    rel = s / s[0]
    keep = rel > rtol
    kept = rel[keep]
    return U[:, keep], float(kept[-1]) if kept.size else 1.0


def invariant_closure(family: Sequence[np.ndarray], vectors, tol: float = 1e-9):
    """Smallest subspace containing ``vectors`` and invariant under ``family``.

    Returns ``(Q, margin)`` where the columns of ``Q`` are an orthonormal
    basis and ``margin`` is the smallest relative singular value that was
    accepted as nonzero during the closure (small values mean the rank
    decision was close).
    """
    mats = [A / max(np.linalg.norm(A, 2), 1e-300) for A in family]
    V = np.atleast_2d(np.asarray(vectors, dtype=float))
    if V.shape[0] != mats[0].shape[0]:
        V = V.T
    Q, margin = _orth(V, tol)
    d = mats[0].shape[0]
    while True:
        W = np.hstack([Q] + [A @ Q for A in mats])
        Q_new, m = _orth(W, tol)
        margin = min(margin, m)
        if Q_new.shape[1] == Q.shape[1] or Q_new.shape[1] == d:
            return Q_new, margin
        Q = Q_new


@dataclass(frozen=True)
class Irreducibility:
    """Verdict of :func:`is_irreducible`.

    ``witness`` is an orthonormal basis of a proper common invariant
    subspace when the family is reducible. ``margin`` is the smallest
    relative singular value accepted during the closure computations.
    """

    irreducible: bool
    witness: np.ndarray | None
    margin: float

    def __bool__(self) -> bool:
        return self.irreducible


def _spectral_probes(C: np.ndarray) -> list[np.ndarray]:
    """Real bases of the 1D real and 2D complex-pair eigenspaces of ``C``."""
    w, V = np.linalg.eig(C)
    probes = []
    done = np.zeros(len(w), dtype=bool)
    scale = max(1.0, float(np.max(np.abs(w))))
    for k in range(len(w)):
        if done[k]:
            continue
        done[k] = True
        v = V[:, k]
        if abs(w[k].imag) <= 1e-12 * scale:
            probes.append(np.real(v)[:, None])
        else:
            # mark the conjugate partner
            for l in range(k + 1, len(w)):
                if not done[l] and abs(w[l] - np.conj(w[k])) <= 1e-9 * scale:
                    done[l] = True
                    break
            probes.append(np.column_stack([v.real, v.imag]))
    return probes


def _has_simple_spectrum(C: np.ndarray, rel_gap: float = 1e-6) -> bool:
    w = np.linalg.eigvals(C)
    scale = max(float(np.max(np.abs(w))), 1e-300)
    if len(w) < 2:
        return True
    gaps = np.abs(w[:, None] - w[None, :])
    np.fill_diagonal(gaps, np.inf)
    return float(np.min(gaps)) > rel_gap * scale


def is_irreducible(family: Sequence, tol: float = 1e-9, seed: int = 0) -> Irreducibility:
    """Decide whether a matrix family shares a proper invariant subspace.

    Any common invariant subspace ``L`` is invariant under every element
    ``C`` of the algebra generated by the family, hence is a sum of spectral
    subspaces of ``C``. When some ``C`` (a member, a random combination or
    a random combination of products) has simple spectrum, probing the
    closure of each of its eigen-directions is therefore exhaustive. If no
    such ``C`` is found, eigen-directions of every member are probed.

    Parameters
    ----------
    family : sequence of (d, d) arrays
    tol : float
        Relative singular value threshold for subspace rank decisions.
    seed : int
        Seed for the random combinations (the verdict does not depend on it
        for generic families).
    """
    mats = [as_matrix(A) for A in family]
    if not mats:
        raise ValueError("family must be nonempty")
    d = mats[0].shape[0]
    if any(A.shape != (d, d) for A in mats):
        raise ValueError("dimension mismatch in matrix family")
    if d == 1:
        return Irreducibility(True, None, 1.0)

    if all(np.allclose(A, A[0, 0] * np.eye(d), atol=tol * max(1.0, np.abs(A).max())) for A in mats):
        return Irreducibility(False, np.eye(d)[:, :1], 1.0)

    rng = np.random.default_rng(seed)
    normed = [A / max(np.linalg.norm(A, 2), 1e-300) for A in mats]
    candidates = list(normed)
    c = rng.standard_normal(len(normed))
    candidates.append(sum(ci * A for ci, A in zip(c, normed)))
    if len(normed) > 1:
        prods = [A @ B for A in normed for B in normed]
        c = rng.standard_normal(len(prods))
        candidates.append(sum(ci * P for ci, P in zip(c, prods)) + candidates[-1])

    probe_sources = [C for C in candidates if _has_simple_spectrum(C)][:1] or mats
    margin = 1.0
    for C in probe_sources:
        for U in _spectral_probes(C):
            Q, m = invariant_closure(mats, U, tol)
            margin = min(margin, m)
            if Q.shape[1] < d:
                return Irreducibility(False, Q, margin)
    if margin < 1e-6:
        warnings.warn(
            f"family is irreducible only by a relative margin of {margin:.2e}",
            NearReducibleWarning,
            stacklevel=2,
        )
    return Irreducibility(True, None, margin)
