"""Cut-tail points of stable matrices and the bound simplification they allow.

For a stable ``A`` and a generic ``x0`` let ``G`` be the symmetrized convex
hull of the whole trajectory ``x(t) = e^{tA} x0``. The arc up to ``T_cut``
lies on the boundary of ``G`` and everything after it lies inside. Hence,
if a mode may run for at least ``T_cut`` past its dwell time, its upper
bound can be lowered to ``m + T_cut`` (or dropped) without changing
stability.

Deciding whether ``T`` is a cut-tail point amounts to computing the norm of
``x(T)`` with respect to ``G``,

    value(T) = max { <p, x(T)> : |<p, x(t)>| <= 1 for all t >= 0 },

which equals 1 up to ``T_cut`` and drops below 1 afterwards (quadratically
in ``T - T_cut``). The semi-infinite constraint is handled by an exchange
method: a finite set of constraint times, the LP core for the norm, and a
dense search for violated times, with an analytic tail bound beyond a
horizon ``H``.
"""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from scipy.optimize import brentq, minimize_scalar

from .lpcore import PolytopeHull, membership
from .numlin import as_matrix, expm, invariant_closure, spectral_abscissa, spectrum
from .sysmodel import RestrictedSystem

__all__ = [
    "CLOSED_FORM_REAL",
    "CLOSED_FORM_COMPLEX",
    "CONVEX_PROGRAM",
    "CutTailCheck",
    "CutTailResult",
    "BoundChange",
    "CutTailProgram",
    "t_cut_2d_real",
    "t_cut_2d_complex",
    "is_cut_tail",
    "find_t_cut",
    "simplify_bounds",
]

log = logging.getLogger(__name__)

CLOSED_FORM_REAL = "closed_form_real_2d"
CLOSED_FORM_COMPLEX = "closed_form_complex_2d"
CONVEX_PROGRAM = "convex_program"

MARGIN = 1e-7


def t_cut_2d_real(a1: float, a2: float) -> float:
    """Cut-tail time of a 2x2 matrix with distinct negative eigenvalues.

    Root of ``(1 + e^{-a1 t}) / a1 = (1 + e^{-a2 t}) / a2`` on ``t > 0``.
    """
    a1, a2 = float(a1), float(a2)
    if not (a1 < 0 and a2 < 0):
        raise ValueError("eigenvalues must be negative")
    if a1 == a2:
        raise ValueError("equal eigenvalues are not covered by the closed form")
    if a1 < a2:
        a1, a2 = a2, a1  # a2 is now the faster one

    # a2 (1 + e^{-a1 t}) - a1 (1 + e^{-a2 t}), scaled by e^{a2 t} to avoid overflow
    def f(t):
        return a2 * (math.exp(a2 * t) + math.exp((a2 - a1) * t)) - a1 * (math.exp(a2 * t) + 1.0)

    hi = 1.0 / abs(a1)
    while f(hi) <= 0:
        hi *= 2.0
        if hi > 1e6:
            raise ArithmeticError("failed to bracket the cut-tail root")
    return brentq(f, 0.0, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)


def t_cut_2d_complex(alpha: float, beta: float) -> float:
    """Cut-tail time of a 2x2 matrix with eigenvalues ``alpha +- i beta``.

    Smallest positive root of ``alpha sin(bt) + b cos(bt) + b e^{alpha t}``
    with ``b = |beta|`` (the equation is odd in ``beta``).
    """
    alpha, b = float(alpha), abs(float(beta))
    if not alpha < 0:
        raise ValueError("real part must be negative")
    if b == 0:
        raise ValueError("beta must be nonzero")

    def g(t):
        return alpha * math.sin(b * t) + b * math.cos(b * t) + b * math.exp(alpha * t)

    # g(0) = 2b > 0 and g(pi / b) = b (e^{alpha pi / b} - 1) < 0
    end = math.pi / b
    h = end / 64.0
    t = 0.0
    while t + h < end and g(t + h) > 0:
        t += h
    return brentq(g, t, min(t + h, end), xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)


@dataclass(frozen=True)
class CutTailCheck:
    """Verdict of :func:`is_cut_tail`.

    ``value_upper`` and ``value_lower`` bracket the program value; the
    status is ``"cut_tail"`` when ``value_upper < 1 - margin``,
    ``"not_cut_tail"`` when ``value_lower`` is 1 to working precision
    and ``"inconclusive"`` in between. Truthy only for ``"cut_tail"``.
    """

    T: float
    status: str
    value_upper: float
    value_lower: float
    functional: np.ndarray | None = field(default=None, repr=False)

    def __bool__(self) -> bool:
        return self.status == "cut_tail"

    @property
    def value(self) -> float:
        return self.value_upper


@dataclass(frozen=True)
class CutTailResult:
    """``T_cut`` with the method used and, for the program, probe values."""

    T_cut: float
    method: str
    certificate: dict = field(default_factory=dict)


def _generic_start(A: np.ndarray, seed: int) -> np.ndarray:
    """Random unit vector whose Krylov space is as large as possible."""
    rng = np.random.default_rng(seed)
    best, best_rank = None, -1
    for _ in range(4):
        x = rng.standard_normal(A.shape[0])
        x /= np.linalg.norm(x)
        rank = invariant_closure([A], x)[0].shape[1]
        if rank > best_rank:
            best, best_rank = x, rank
    return best


class CutTailProgram:
    """Norm of ``x(T)`` in the symmetrized hull of the trajectory of ``A``.

    Parameters
    ----------
    A : (d, d) array
        Stable matrix.
    x0 : (d,) array, optional
        Generic starting point; seeded random by default.
    horizon_mult : float
        Multiplier on the horizon at which the tail envelope drops below
        ``1e-9``.
    grid : int
        Number of Chebyshev-spaced initial constraint times on ``[0, H]``.
    seed : int
    """

    def __init__(self, A, x0=None, horizon_mult: float = 1.0, grid: int = 64, seed: int = 0):
        A = as_matrix(A)
        s = spectral_abscissa(A)
        if not s < 0:
            raise ValueError(f"matrix is not stable (spectral abscissa {s:.6g})")
        self.A = A
        self.d = A.shape[0]
        self.x0 = _generic_start(A, seed) if x0 is None else np.asarray(x0, dtype=float).ravel()
        # x(t)^T X x(t) is nonincreasing for A^T X + X A = -I
        X = scipy.linalg.solve_continuous_lyapunov(A.T, -np.eye(self.d))
        X = 0.5 * (X + X.T)
        self._X = X
        self._lam_min = float(np.linalg.eigvalsh(X)[0])
        # horizon: envelope of |x(t)| below 1e-9 (relative to |x0|), times the multiplier
        H = max(1.0, 1.0 / abs(s))
        while self.envelope(H) > 1e-9 * np.linalg.norm(self.x0):
            H *= 1.5
        self.H = H * max(horizon_mult, 1.0)
        # dense sampling for the violation search
        w = max(float(np.max(np.abs(spectrum(A).imag))), abs(s), 1e-3)
        self._h = min(self.H / 4000.0, 0.05 / w)
        n = int(math.ceil(self.H / self._h))
        self._h = self.H / n
        step = expm(A, self._h)
        pts = np.empty((n + 1, self.d))
        y = self.x0.copy()
        pts[0] = y
        for k in range(1, n + 1):
            y = step @ y
            pts[k] = y
        self._dense_t = np.linspace(0.0, self.H, n + 1)
        self._dense_x = pts
        # initial constraint set: Chebyshev-like spacing, denser near t = 0
        k = np.arange(grid)
        t0 = 0.5 * self.H * (1.0 - np.cos(np.pi * k / (grid - 1)))
        self._times = list(np.unique(np.concatenate([t0, [0.0]])))
        self._cache: dict = {}

    def x(self, t: float) -> np.ndarray:
        return expm(self.A, t) @ self.x0

    def envelope(self, H: float) -> float:
        """Upper bound of ``|x(t)|_2`` over ``t >= H``."""
        y = self.x(H)
        return math.sqrt(max(float(y @ self._X @ y), 0.0) / self._lam_min)

    def _sup(self, p: np.ndarray) -> tuple[float, list[float]]:
        """``sup_t |<p, x(t)>|`` and the times of local maxima above 1."""
        vals = np.abs(self._dense_x @ p)
        tail = float(np.linalg.norm(p)) * self.envelope(self.H)
        best = max(float(vals.max()), tail)
        # local maxima of the sampled curve, refined
        idx = np.flatnonzero((vals[1:-1] >= vals[:-2]) & (vals[1:-1] >= vals[2:])) + 1
        idx = np.concatenate([idx, [0, len(vals) - 1]])
        # a bump narrower than the sampling step can hide up to O(h^2) below its peak
        idx = idx[vals[idx] > 0.9 * vals.max()]
        new = []
        for i in idx:
            lo = max(0.0, self._dense_t[i] - self._h)
            hi = min(self.H, self._dense_t[i] + self._h)
            if hi > lo:
                r = minimize_scalar(lambda t: -abs(p @ self.x(t)), bounds=(lo, hi), method="bounded",
                                    options={"xatol": 1e-12})
                t_star, v = float(r.x), -float(r.fun)
                if v < vals[i]:
                    t_star, v = float(self._dense_t[i]), float(vals[i])
            else:
                t_star, v = float(self._dense_t[i]), float(vals[i])
            best = max(best, v)
            if v > 1.0 + 1e-13:
                new.append(t_star)
        return best, new

    def value(self, T: float, max_rounds: int = 50) -> tuple[float, float, np.ndarray]:
        """Bracket ``(lower, upper, p)`` of the program value at ``T``."""
        T = float(T)
        if T < 0:
            raise ValueError("T must be nonnegative")
        xT = self.x(T)
        for _ in range(max_rounds):
            times = sorted(set(self._times) | {T})
            V = self._points(times)
            res = membership(PolytopeHull(V), xT)
            upper, p = res.norm, res.functional
            if p is None or not math.isfinite(upper):
                raise ArithmeticError("trajectory hull does not contain x(T) in its span")
            sup, new = self._sup(p)
            sup = max(sup, 1.0)
            if not new or sup <= 1.0 + 1e-12:
                return upper / sup, upper, p
            self._times.extend(new)
        return upper / sup, upper, p

    def _points(self, times) -> np.ndarray:
        cache = self._cache
        out = np.empty((len(times), self.d))
        for k, t in enumerate(times):
            v = cache.get(t)
            if v is None:
                v = cache[t] = self.x(t)
            out[k] = v
        return out

    def check(self, T: float, margin: float = MARGIN) -> CutTailCheck:
        if T <= 0:
            return CutTailCheck(float(T), "not_cut_tail", 1.0, 1.0, None)
        lower, upper, p = self.value(T)
        if upper < 1.0 - margin:
            status = "cut_tail"
        elif lower >= 1.0 - 1e-10:
            status = "not_cut_tail"
        else:
            status = "inconclusive"
        return CutTailCheck(float(T), status, float(upper), float(lower), p)

    def deficit(self, T: float) -> float:
        """``1 - value(T)`` (upper end of the bracket), clipped at 0."""
        return max(0.0, 1.0 - self.value(T)[1])


def is_cut_tail(A, T: float, horizon_mult: float = 1.0, grid: int = 64, margin: float = MARGIN,
                seed: int = 0) -> CutTailCheck:
    """Decide whether ``T`` is a cut-tail point of the stable matrix ``A``.

    ``T <= 0`` is never a cut-tail point (``x(0)`` is an extreme point of
    the hull).

    Raises
    ------
    ValueError
        If ``A`` is not stable.
    """
    prog = CutTailProgram(A, horizon_mult=horizon_mult, grid=grid, seed=seed)
    return prog.check(T, margin)


def _classify_2d(A: np.ndarray):
    w = spectrum(A)
    scale = max(1.0, float(np.max(np.abs(w))))
    if abs(w[0].imag) > 1e-12 * scale:
        return CLOSED_FORM_COMPLEX, (float(w[0].real), float(abs(w[0].imag)))
    a, b = sorted(float(v.real) for v in w)
    if abs(a - b) <= 1e-8 * scale:
        return None, None
    return CLOSED_FORM_REAL, (a, b)


def find_t_cut(A, method: str | None = None, tol: float = 1e-6, seed: int = 0) -> CutTailResult:
    """Smallest cut-tail point of a stable matrix.

    2x2 matrices with distinct real or complex eigenvalues use the closed
    forms; everything else (or ``method="convex_program"``) uses the
    program. There ``value(T)`` equals 1 up to ``T_cut`` and then
    ``1 - value ~ c (T - T_cut)^2``; the point where the deficit first
    exceeds a small threshold is found by bisection and the square root of
    the deficit is then extrapolated to zero by a quadratic fit.
    """
    A = as_matrix(A)
    if not spectral_abscissa(A) < 0:
        raise ValueError("matrix is not stable")
    if method not in (None, CLOSED_FORM_REAL, CLOSED_FORM_COMPLEX, CONVEX_PROGRAM):
        raise ValueError(f"unknown method {method!r}")
    if A.shape[0] == 2 and method != CONVEX_PROGRAM:
        kind, params = _classify_2d(A)
        if method is not None and kind != method:
            raise ValueError(f"method {method!r} does not apply to this matrix")
        if kind == CLOSED_FORM_REAL:
            return CutTailResult(t_cut_2d_real(*params), kind, {"eigenvalues": params})
        if kind == CLOSED_FORM_COMPLEX:
            return CutTailResult(t_cut_2d_complex(*params), kind, {"eigenvalues": params})
    elif method in (CLOSED_FORM_REAL, CLOSED_FORM_COMPLEX):
        raise ValueError("closed forms exist for 2x2 matrices only")
    if A.shape[0] == 1:
        raise ValueError("a scalar trajectory has no positive cut-tail time")
    return _t_cut_program(A, tol, seed)


def _t_cut_program(A: np.ndarray, tol: float, seed: int) -> CutTailResult:
    prog = CutTailProgram(A, seed=seed)
    theta = 1e-8
    # bracket: deficit <= theta at lo, > theta at hi
    hi = min(1.0 / abs(spectral_abscissa(A)), prog.H / 2)
    while prog.deficit(hi) <= theta:
        hi *= 2.0
        if hi > prog.H:
            raise ArithmeticError("no cut-tail point found within the horizon")
    lo = hi / 2.0
    while prog.deficit(lo) > theta:
        hi, lo = lo, lo / 2.0
        if lo < 1e-12:
            raise ArithmeticError("cut-tail point indistinguishable from 0")
    # the fit below only needs the threshold point roughly
    while hi - lo > max(0.1 * tol, 1e-5 * hi):
        mid = 0.5 * (lo + hi)
        if prog.deficit(mid) > theta:
            hi = mid
        else:
            lo = mid
    # sqrt(deficit) is ~ linear in T - T_cut; fit a quadratic and take its root
    h = max(1e-3, 2e-3 * hi)
    ts = hi + h * np.arange(1, 6)
    roots = np.sqrt([prog.deficit(t) for t in ts])
    coef = np.polyfit(ts - hi, roots, 2)
    cands = [r.real for r in np.roots(coef) if abs(r.imag) < 1e-12 and -5 * h < r.real <= 0.0 + 1e-9]
    if cands:
        T = hi + max(cands)
    else:
        # fall back to the linear extrapolation through the first two samples
        slope = (roots[1] - roots[0]) / h
        T = ts[0] - roots[0] / slope
    # the threshold point lies above T_cut by about sqrt(theta / c)
    T = float(min(max(T, 0.0), hi))
    probes = {f"{t:.6g}": float(1.0 - d * d) for t, d in zip(ts, roots)}
    return CutTailResult(T, CONVEX_PROGRAM, {"threshold_point": float(hi), "values": probes})


@dataclass(frozen=True)
class BoundChange:
    """One line of the change log of :func:`simplify_bounds`."""

    mode: int
    old_upper: float
    new_upper: float
    t_cut: float | None
    action: str  # "reduced", "cancelled", "unchanged", "skipped"
    reason: str


def simplify_bounds(sys: RestrictedSystem, mode: str = "reduce") -> tuple[RestrictedSystem, list[BoundChange]]:
    """Lower (``"reduce"``) or drop (``"cancel"``) upper bounds of stable modes.

    A stable mode with ``M_j - m_j >= T_cut(A_j)`` gets ``M_j = m_j + T_cut``
    or ``M_j = inf``; this preserves stability of the system. Unstable
    modes and modes whose segment is shorter than ``T_cut`` are left as
    they are.
    """
    if mode not in ("reduce", "cancel"):
        raise ValueError("mode must be 'reduce' or 'cancel'")
    upper = list(sys.upper)
    changes = []
    for j, A in enumerate(sys.modes):
        m, M = sys.lower[j], sys.upper[j]
        if spectral_abscissa(A) >= 0:
            changes.append(BoundChange(j, M, M, None, "skipped", "unstable"))
            warnings.warn(f"mode {j} is not stable; its bound is left unchanged", stacklevel=2)
            continue
        if sys.d == 1:
            # a scalar trajectory is inside its own hull at every t > 0
            t_cut = 0.0
        else:
            t_cut = find_t_cut(A).T_cut
        if M - m < t_cut:
            changes.append(BoundChange(j, M, M, t_cut, "unchanged", "segment shorter than T_cut"))
            continue
        new = m + t_cut if mode == "reduce" else math.inf
        if mode == "reduce" and t_cut == 0.0:
            changes.append(BoundChange(j, M, M, t_cut, "unchanged", "T_cut is 0; keep the bound"))
            continue
        upper[j] = new
        changes.append(BoundChange(j, M, new, t_cut, "reduced" if mode == "reduce" else "cancelled",
                                   "segment covers T_cut"))
    return sys.with_upper(upper), changes
