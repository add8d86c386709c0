"""Minkowski norms of polytopes given by vertices.

Three auxiliary problems are solved here: interior membership of a point,
the norm of a point, and the induced norm of a matrix. Two hull types are
supported:

* ``symmetrized``: ``co{V, -V}``;
* ``positive``: ``{x >= 0 : x <= y for some y in co V}`` (for Metzler
  systems living in the positive orthant).

For a vertex matrix ``V`` (rows are vertices) the norm of ``x0`` is the
value of a small linear program,

    symmetrized:  min sum(a + b)   s.t.  V^T (a - b) = x0,  a, b >= 0
    positive:     min sum(l)       s.t.  V^T l - y = x0,    l, y >= 0

and ``t0 = 1 / norm`` is the largest ``t`` with ``t x0`` in the hull.
Normalising the optimal multipliers by the norm gives the certificate
``t0 x0 = sum (t_i - s_i) v_i`` with ``sum t_i + sum s_i = 1`` (resp.
``t0 x0 = sum t_i v_i + y``, ``y <= 0``, ``sum t_i = 1``).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

__all__ = [
    "SYMMETRIZED",
    "POSITIVE",
    "LPFailure",
    "PolytopeHull",
    "LpResult",
    "solve_lp",
    "membership",
    "point_norm",
    "operator_norm",
]

SYMMETRIZED = "symmetrized"
POSITIVE = "positive"
_STRATEGIES = (SYMMETRIZED, POSITIVE)

TOL_STRICT = 1e-9


class LPFailure(RuntimeError):
    """The simplex iteration did not converge."""

    def __init__(self, message: str, iterations: int):
        super().__init__(f"{message} (after {iterations} simplex iterations)")
        self.iterations = iterations


@dataclass(frozen=True)
class PolytopeHull:
    """Polytope given by a vertex list and a hull strategy."""

    vertices: np.ndarray
    strategy: str = SYMMETRIZED

    def __post_init__(self):
        V = np.atleast_2d(np.asarray(self.vertices, dtype=float))
        if V.size == 0 or V.shape[0] == 0:
            raise ValueError("vertex list must be nonempty")
        if self.strategy not in _STRATEGIES:
            raise ValueError(f"unknown hull strategy {self.strategy!r}")
        if not np.all(np.isfinite(V)):
            raise ValueError("vertices must be finite")
        if self.strategy == POSITIVE and np.any(V < 0):
            raise ValueError("positive hulls need nonnegative vertices")
        object.__setattr__(self, "vertices", V)

    @property
    def dim(self) -> int:
        return self.vertices.shape[1]

    def is_full_dimensional(self, rtol: float = 1e-10) -> bool:
        V = self.vertices
        if self.strategy == POSITIVE:
            # the downward closure is solid iff every coordinate is reached
            return bool(np.all(V.max(axis=0) > rtol * max(V.max(), 1e-300)))
        s = np.linalg.svd(V, compute_uv=False)
        return bool(s.size >= self.dim and s[self.dim - 1] > rtol * s[0])


@dataclass(frozen=True)
class LpResult:
    """Solution of the membership program.

    ``t0`` is ``max {t : t x0 in P}`` (``inf`` when ``x0`` has zero norm,
    ``0`` when no positive multiple of ``x0`` lies in ``P``).
    ``t`` and ``s`` are the normalised multipliers (``s`` holds the slack
    ``y`` for positive hulls). ``functional`` is a dual vector ``p`` with
    ``|<p, v>| <= 1`` on the hull and ``<p, x0> = norm``.
    """

    t0: float
    norm: float
    status: str
    t: np.ndarray = field(repr=False)
    s: np.ndarray = field(repr=False)
    functional: np.ndarray | None = field(repr=False, default=None)
    iterations: int = 0

    @property
    def interior(self) -> bool:
        return self.status == "interior"


def _pivot_loop(A, b, c, basis, allowed, tol, max_iter, it0):
    """Revised primal simplex on ``min c x, Ax = b, x >= 0`` from a feasible basis.

    Dantzig pricing, switching to Bland's rule after a run of degenerate
    pivots. Returns (status, basis, xB, y, iterations).
    """
    m = A.shape[0]
    it = it0
    bland = False
    stall = 0
    while True:
        B = A[:, basis]
        try:
            xB = np.linalg.solve(B, b)
            y = np.linalg.solve(B.T, c[basis])
        except np.linalg.LinAlgError:
            raise LPFailure("singular basis", it)
        r = c - A.T @ y
        r[basis] = 0.0
        r[~allowed] = 0.0
        cand = np.flatnonzero(r < -tol)
        if cand.size == 0:
            return "optimal", basis, xB, y, it
        if it >= max_iter:
            raise LPFailure("iteration limit reached", it)
        j = int(cand[0]) if bland else int(cand[np.argmin(r[cand])])
        dvec = np.linalg.solve(B, A[:, j])
        rows = np.flatnonzero(dvec > tol)
        if rows.size == 0:
            return "unbounded", basis, xB, y, it
        ratios = np.maximum(xB[rows], 0.0) / dvec[rows]
        rmin = ratios.min()
        ties = rows[ratios <= rmin + tol]
        if bland:
            leave = int(min(ties, key=lambda i: basis[i]))
        else:
            # largest pivot among ratio ties keeps the basis well conditioned
            leave = int(ties[np.argmax(dvec[ties])])
        if rmin <= tol:
            stall += 1
            if stall > 2 * m + 5:
                bland = True
        else:
            stall = 0
        basis = basis.copy()
        basis[leave] = j
        it += 1


def solve_lp(A, b, c, tol: float = 1e-11, max_iter: int = 500):
    """Solve ``min c x  s.t.  A x = b, x >= 0`` by the two-phase simplex.

    If the dense simplex breaks down (singular basis or iteration limit)
    the problem is handed to the HiGHS solver of ``scipy.optimize.linprog``.

    Returns
    -------
    status : {"optimal", "infeasible", "unbounded"}
    x : ndarray or None
    y : ndarray or None
        Dual vector (``A^T y <= c`` at optimality).
    iterations : int
    """
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    c = np.asarray(c, dtype=float)
    try:
        return _simplex(A, b, c, tol, max_iter)
    except LPFailure as err:
        return _highs(A, b, c, err)
    except np.linalg.LinAlgError:
        return _highs(A, b, c, LPFailure("singular basis", 0))


def _highs(A, b, c, err: LPFailure):
    res = linprog(c, A_eq=A, b_eq=b, bounds=(0, None), method="highs")
    it = err.iterations + int(getattr(res, "nit", 0))
    if res.status == 2:
        return "infeasible", None, None, it
    if res.status == 3:
        return "unbounded", None, None, it
    if res.status != 0:
        raise LPFailure(f"{err.args[0]}; fallback solver: {res.message}", it)
    return "optimal", np.maximum(res.x, 0.0), np.asarray(res.eqlin.marginals, dtype=float), it


def _simplex(A, b, c, tol, max_iter):
    m, n = A.shape
    sign = np.where(b < 0, -1.0, 1.0)
    As = A * sign[:, None]
    bs = b * sign
    scale = max(1.0, float(np.abs(bs).max()) if m else 1.0)

    A1 = np.hstack([As, np.eye(m)])
    c1 = np.concatenate([np.zeros(n), np.ones(m)])
    basis = np.arange(n, n + m)
    allowed = np.ones(n + m, dtype=bool)
    status, basis, xB, _, it = _pivot_loop(A1, bs, c1, basis, allowed, tol, max_iter, 0)
    if float(np.sum(xB[basis >= n])) > 1e-9 * scale:
        return "infeasible", None, None, it

    # drive zero-level artificials out of the basis where possible
    for pos in range(m):
        if basis[pos] < n:
            continue
        B = A1[:, basis]
        row = np.linalg.solve(B, A1[:, :n])[pos]
        row[basis[basis < n]] = 0.0
        if np.abs(row).max(initial=0.0) > 1e-9:
            basis = basis.copy()
            basis[pos] = int(np.argmax(np.abs(row)))

    c2 = np.concatenate([c, np.zeros(m)])
    allowed = np.concatenate([np.ones(n, dtype=bool), np.zeros(m, dtype=bool)])
    status, basis, xB, y, it = _pivot_loop(A1, bs, c2, basis, allowed, tol, max_iter, it)
    if status == "unbounded":
        return "unbounded", None, None, it
    x = np.zeros(n + m)
    x[basis] = np.maximum(xB, 0.0)
    return "optimal", x[:n], y * sign, it


def _zero_result(hull: PolytopeHull) -> LpResult:
    full = hull.is_full_dimensional()
    ell, d = hull.vertices.shape
    k = ell if hull.strategy == SYMMETRIZED else d
    return LpResult(np.inf, 0.0, "interior" if full else "boundary", np.zeros(ell), np.zeros(k),
                    np.zeros(d), 0)


def membership(hull: PolytopeHull, x0, tol_strict: float = TOL_STRICT) -> LpResult:
    """Largest ``t0`` with ``t0 x0`` in the hull, with interior verdict.

    ``status`` is ``"interior"`` when ``t0 > 1 + tol_strict``, ``"boundary"``
    when ``|t0 - 1| <= tol_strict`` and ``"exterior"`` otherwise. A zero
    query point is interior iff the hull is full-dimensional.

    Raises
    ------
    LPFailure
        If the simplex does not converge.
    """
    x0 = np.asarray(x0, dtype=float).ravel()
    V = hull.vertices
    ell, d = V.shape
    if x0.shape != (d,):
        raise ValueError(f"point has dimension {x0.size}, hull has {d}")
    if not np.any(x0):
        return _zero_result(hull)

    if hull.strategy == SYMMETRIZED:
        A = np.hstack([V.T, -V.T])
        c = np.ones(2 * ell)
    else:
        A = np.hstack([V.T, -np.eye(d)])
        c = np.concatenate([np.ones(ell), np.zeros(d)])
    status, x, y, it = solve_lp(A, x0, c)

    if status == "infeasible":
        empty = np.zeros(ell) if hull.strategy == SYMMETRIZED else np.zeros(d)
        return LpResult(0.0, np.inf, "exterior", np.zeros(ell), empty, None, it)
    if status == "unbounded":  # cannot happen: costs are nonnegative
        raise LPFailure("unbounded norm program", it)

    value = float(c @ x)
    if value <= 0.0:
        t = np.zeros(ell)
        rest = np.zeros(ell) if hull.strategy == SYMMETRIZED else -x0.copy()
        return LpResult(np.inf, 0.0, "interior", t, rest, y, it)
    t0 = 1.0 / value
    if hull.strategy == SYMMETRIZED:
        t, s = x[:ell] * t0, x[ell:] * t0
    else:
        t, s = x[:ell] * t0, -x[ell:] * t0
    if t0 > 1.0 + tol_strict:
        verdict = "interior"
    elif t0 >= 1.0 - tol_strict:
        verdict = "boundary"
    else:
        verdict = "exterior"
    return LpResult(t0, value, verdict, t, s, y, it)


def point_norm(hull: PolytopeHull, x0) -> float:
    """Minkowski functional of the hull at ``x0`` (``inf`` outside its span)."""
    return membership(hull, x0).norm


def operator_norm(hull: PolytopeHull, A) -> float:
    """``max_j |A v_j|_P`` over the hull vertices.

    For symmetrized hulls this is the operator norm induced by the
    Minkowski norm. For positive hulls it is the induced norm on the
    orthant whenever ``A`` is entrywise nonnegative.
    """
    A = np.asarray(A, dtype=float)
    images = hull.vertices @ A.T
    return max(point_norm(hull, w) for w in images)
