"""Invariant multi-polytope construction and certified bounds on the exponent.

The restricted system is discretized: mode ``j`` is run for
``m_j + s * tau_j`` time units, ``s = 0..N``, ``tau_j = (M_j - m_j) / N``.
Starting from one point, images of the newest ("alive") vertices are pushed
through every generator into every other mode's space; images that fall
strictly inside the current polytope of that space die, the others become
vertices. Along the way every closed loop in the genealogy of a new vertex
gives a periodic switching law and hence a lower bound ``mu``.

Three outcomes are possible:

* ``mu > -delta``: the system has exponent at least ``mu`` (``UNSTABLE_CANDIDATE``);
* an iteration produces no new vertex: the polytopes define a multinorm
  that is Lyapunov for the system shifted by ``nu`` (``LYAPUNOV_CERTIFICATE``);
* the iteration cap is reached: one more sweep measures how far the newest
  images stick out (``gamma``) and a weaker upper bound follows (``INTERRUPTED``).

Between grid durations the norm of a trajectory is controlled by the chord
estimate ``|x(t)| <= max(|x(0)|, |x(tau)|) / (1 - tau^2 K / 8)`` with ``K``
the induced norm of ``A^2`` (for positive hulls, of the positive part of
``-A^2``). This is what turns a discrete certificate into a continuous one.
"""
from __future__ import annotations

import json
import logging
import math
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np

from .lpcore import POSITIVE, SYMMETRIZED, TOL_STRICT, PolytopeHull, membership, operator_norm, point_norm
from .numlin import (
    expm,
    invariant_closure,
    is_irreducible,
    leading_schur_vector,
    log_spectral_radius,
    lognorm_bracket,
    spectral_abscissa,
)
from .sysmodel import FiniteSwitchingLaw, RestrictedSystem, law_to_json

__all__ = [
    "UNSTABLE_CANDIDATE",
    "LYAPUNOV_CERTIFICATE",
    "INTERRUPTED",
    "InfiniteBoundError",
    "ReducibleFamilyWarning",
    "EngineConfig",
    "DiscretizedFamily",
    "VertexRecord",
    "MultiPolytope",
    "AlgorithmReport",
    "BisectionStep",
    "SigmaInterval",
    "LyapunovAudit",
    "discretize",
    "default_start",
    "run_algorithm1",
    "nu_bound",
    "curvature_bound",
    "prune_redundant",
    "bisect_sigma",
    "check_lyapunov_multinorm",
]

log = logging.getLogger(__name__)

UNSTABLE_CANDIDATE = "unstable_candidate"
LYAPUNOV_CERTIFICATE = "lyapunov_certificate"
INTERRUPTED = "interrupted"

_HULL_ALIASES = {"sym": SYMMETRIZED, SYMMETRIZED: SYMMETRIZED, "pos": POSITIVE, POSITIVE: POSITIVE}


class InfiniteBoundError(ValueError):
    """A mode has no finite upper switching bound."""


class ReducibleFamilyWarning(UserWarning):
    """The discretized generators share a proper invariant subspace."""


@dataclass(frozen=True)
class EngineConfig:
    """Parameters of one run of the multi-polytope construction.

    Parameters
    ----------
    N : int
        Number of grid steps per switching segment.
    delta : float
        The run halts as soon as a lower bound ``mu > -delta`` is found.
    K_max : int
        Iteration cap; reaching it triggers the interrupted-run bound.
    hull : {"symmetrized", "positive"}
    start_space : int or "auto"
        0-based space of the starting point; ``"auto"`` picks the mode
        with the largest spectral abscissa.
    parallel : bool
        Test membership against the polytopes at the start of each
        iteration instead of the growing ones. Order-independent, yields
        more vertices, certificates stay valid.
    max_vertices : int
        Per-space vertex budget; exceeding it interrupts the run.
    tol_strict : float
        Interior band of the membership test.
    dedup_rtol : float
        New points this close (relatively) to an existing vertex are merged.
    refine : int
        After a certificate, vertex images are also measured on a grid
        ``refine`` times finer, giving a second, usually much tighter,
        upper bound. ``0`` disables it.
    """

    N: int = 10
    delta: float = 1e-4
    K_max: int = 40
    hull: str = SYMMETRIZED
    start_space: int | str = "auto"
    parallel: bool = False
    max_vertices: int = 5000
    tol_strict: float = TOL_STRICT
    dedup_rtol: float = 1e-10
    refine: int = 4

    def __post_init__(self):
        if self.hull not in _HULL_ALIASES:
            raise ValueError(f"unknown hull strategy {self.hull!r}")
        object.__setattr__(self, "hull", _HULL_ALIASES[self.hull])
        if int(self.N) != self.N or self.N < 1:
            raise ValueError("N must be a positive integer")
        if not self.delta > 0:
            raise ValueError("delta must be positive")
        if int(self.K_max) != self.K_max or self.K_max < 1:
            raise ValueError("K_max must be a positive integer")
        if int(self.refine) != self.refine or self.refine < 0:
            raise ValueError("refine must be a nonnegative integer")
        if self.start_space != "auto" and (isinstance(self.start_space, bool) or not isinstance(self.start_space, int)):
            raise ValueError("start_space must be an integer or 'auto'")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "EngineConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)


@dataclass(frozen=True, eq=False)
class DiscretizedFamily:
    """Grid generators ``e^{s tau_j A_j} B_j`` with ``B_j = e^{m_j A_j}``."""

    system: RestrictedSystem
    N: int
    taus: tuple
    generators: tuple  # generators[j][s]
    irreducible: bool
    witness: np.ndarray | None = None

    @property
    def count(self) -> int:
        return sum(len(g) for g in self.generators)

    def duration(self, j: int, s: int) -> float:
        return self.system.lower[j] + s * self.taus[j]

    def all_generators(self) -> list:
        return [G for gens in self.generators for G in gens]


def discretize(sys: RestrictedSystem, N: int, check_irreducible: bool = True) -> DiscretizedFamily:
    """Build the ``n (N + 1)`` grid generators of a system with finite bounds.

    Raises
    ------
    InfiniteBoundError
        If some upper bound is infinite; reduce it with the cut-tail tools first.

    Warns
    -----
    ReducibleFamilyWarning
        If the generators share a proper invariant subspace.
    """
    if int(N) != N or N < 1:
        raise ValueError("N must be a positive integer")
    N = int(N)
    bad = [j for j, M in enumerate(sys.upper) if not math.isfinite(M)]
    if bad:
        raise InfiniteBoundError(
            f"modes {bad} have infinite upper bounds; replace them with finite ones "
            "(cut-tail simplification, mode 'reduce') before discretizing"
        )
    taus = tuple((M - m) / N for m, M in zip(sys.lower, sys.upper))
    gens = tuple(
        tuple(expm(A, m + s * tau) for s in range(N + 1))
        for A, m, tau in zip(sys.modes, sys.lower, taus)
    )
    irreducible, witness = True, None
    if check_irreducible:
        verdict = is_irreducible([G for g in gens for G in g])
        irreducible, witness = verdict.irreducible, verdict.witness
        if not irreducible:
            warnings.warn(
                f"the {sys.n * (N + 1)} grid generators share an invariant subspace of dimension "
                f"{witness.shape[1]}; change N or split the system into blocks",
                ReducibleFamilyWarning,
                stacklevel=2,
            )
    return DiscretizedFamily(sys, N, taus, gens, irreducible, witness)


@dataclass(frozen=True, eq=False)
class VertexRecord:
    """A polytope vertex together with the switching law that produced it.

    ``steps`` lists ``(mode, grid index)`` for every leg from the root;
    ``history`` is the same law with durations and ``root_space`` the space
    of the seed the genealogy starts from.
    """

    point: np.ndarray
    space: int
    birth_time: float
    steps: tuple
    history: FiniteSwitchingLaw
    cumulative: np.ndarray
    root_space: int = 0


@dataclass(frozen=True, eq=False)
class MultiPolytope:
    """One vertex set per mode space and a common hull strategy."""

    vertices: tuple
    strategy: str = SYMMETRIZED

    def hull(self, j: int) -> PolytopeHull:
        return PolytopeHull(self.vertices[j], self.strategy)

    @property
    def n(self) -> int:
        return len(self.vertices)

    @property
    def vertex_counts(self) -> tuple:
        return tuple(len(V) for V in self.vertices)

    @property
    def len_p(self) -> tuple:
        """Table-style sizes: stored points per space.

        A symmetrized hull of ``k`` stored points has up to ``2k`` vertices,
        so this is the half-count of its vertices.
        """
        return self.vertex_counts

    def is_full_dimensional(self) -> bool:
        return all(len(V) > 0 and self.hull(j).is_full_dimensional() for j, V in enumerate(self.vertices))

    def norm(self, j: int, x) -> float:
        return point_norm(self.hull(j), x)

    def to_dict(self) -> dict:
        return {"strategy": self.strategy, "vertices": [np.asarray(V).tolist() for V in self.vertices]}

    @classmethod
    def from_dict(cls, data: dict) -> "MultiPolytope":
        verts = tuple(np.array(V, dtype=float).reshape(len(V), -1) if len(V) else np.zeros((0, 0)) for V in data["vertices"])
        return cls(verts, data.get("strategy", SYMMETRIZED))


@dataclass(frozen=True, eq=False)
class AlgorithmReport:
    """Outcome of one run.

    ``lower`` and ``upper`` are certified bounds on the exponent of the
    system the run was applied to (``-inf``/``inf`` when absent).
    ``mu_law`` is the periodic law realising ``mu``. ``nu`` is the
    grid-step bound (inflated by ``gamma`` for interrupted runs) and
    ``nu_refined`` the bound from the finer audit grid; ``upper`` is the
    smaller of the two. ``seeds`` lists ``(space, point)`` for the start
    point and any seed added because the polytopes stayed flat.
    """

    case: str
    mu: float
    mu_law: FiniteSwitchingLaw | None
    nu: float
    gamma: float
    nu_refined: float
    curvature: tuple
    polytopes: MultiPolytope
    iterations: int
    vertex_counts: tuple
    lp_solves: int
    config: EngineConfig
    start_space: int
    start_point: np.ndarray
    records: tuple = field(default=(), repr=False)
    seeds: tuple = ()

    @property
    def lower(self) -> float:
        return self.mu

    @property
    def upper(self) -> float:
        return min(self.nu, self.nu_refined)

    def to_dict(self) -> dict:
        return {
            "case": self.case,
            "mu": _num(self.mu),
            "mu_law": law_to_json(self.mu_law) if self.mu_law is not None else None,
            "nu": _num(self.nu),
            "nu_refined": _num(self.nu_refined),
            "upper": _num(self.upper),
            "gamma": _num(self.gamma),
            "curvature": [_num(k) for k in self.curvature],
            "iterations": self.iterations,
            "vertex_counts": list(self.vertex_counts),
            "lp_solves": self.lp_solves,
            "config": self.config.to_dict(),
            "start_space": self.start_space,
            "start_point": self.start_point.tolist(),
            "seeds": [[j, np.asarray(x).tolist()] for j, x in self.seeds],
            "polytopes": self.polytopes.to_dict(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"


def _num(x: float):
    """JSON-safe float (infinities as strings)."""
    if x is None:
        return None
    x = float(x)
    if math.isfinite(x):
        return x
    return "inf" if x > 0 else ("-inf" if x < 0 else "nan")


def nu_bound(m: float, M: float, N: int, A2norm: float) -> float:
    """Upper-bound inflation ``-(1/m) ln(1 - (M - m)^2 K / (8 N^2))``.

    Raises
    ------
    ValueError
        If ``(M - m)^2 K >= 8 N^2``: no bound is available at this ``N``.
    """
    arg = (M - m) ** 2 * A2norm / (8.0 * N * N)
    if arg >= 1.0:
        raise ValueError(f"(M-m)^2 |A^2| = {(M - m) ** 2 * A2norm:.4g} >= 8 N^2; increase N")
    return -math.log1p(-arg) / m


def curvature_bound(hull: PolytopeHull, A) -> float:
    """Constant ``K`` of the chord estimate for ``x' = A x`` in the hull's norm.

    For symmetrized hulls this is the induced norm of ``A^2``. For positive
    hulls only the downward bend of ``t -> <p, x(t)>`` with ``p >= 0``
    matters, so the induced norm of the entrywise positive part of
    ``-A^2`` is used (exact on the orthant).
    """
    A2 = A @ A
    if hull.strategy == SYMMETRIZED:
        return operator_norm(hull, A2)
    return operator_norm(hull, np.maximum(-A2, 0.0))


def prune_redundant(V, strategy: str) -> np.ndarray:
    """Drop vertices lying in the hull of the remaining ones; the hull is unchanged.

    Later vertices can swallow earlier ones, so after a certificate many
    vertices are redundant.
    """
    keep = list(range(len(V)))
    for k in range(len(V)):
        others = [i for i in keep if i != k]
        if others and membership(PolytopeHull(V[others], strategy), V[k]).t0 >= 1.0:
            keep = others
    return V[keep].copy()


def default_start(sys: RestrictedSystem, family: DiscretizedFamily, config: EngineConfig, seed: int = 0):
    """Starting space and point for a run.

    Symmetrized hulls start from the leading real Schur vector of the chosen
    mode; if its orbit under the generators spans a proper subspace it is
    shifted towards the diagonal (then randomised) so that the polytopes can
    become full-dimensional. Positive hulls start from the all-ones vector.
    """
    if config.start_space == "auto":
        i = int(np.argmax([spectral_abscissa(A) for A in sys.modes]))
    else:
        i = int(config.start_space)
        if not 0 <= i < sys.n:
            raise ValueError(f"start_space {i} out of range")
    d = sys.d
    if config.hull == POSITIVE:
        return i, np.ones(d)
    x = leading_schur_vector(sys.modes[i])
    gens = family.all_generators()
    if invariant_closure(gens, x)[0].shape[1] == d:
        return i, x
    y = x + 0.5 * np.ones(d) / math.sqrt(d)
    if invariant_closure(gens, y)[0].shape[1] == d:
        return i, y / np.linalg.norm(y)
    rng = np.random.default_rng(seed)
    y = x + rng.standard_normal(d) / math.sqrt(d)
    return i, y / np.linalg.norm(y)


class _Run:
    """Mutable state of a single run."""

    def __init__(self, family: DiscretizedFamily, config: EngineConfig, start_space: int, x0):
        self.family = family
        self.cfg = config
        sys = family.system
        self.sys = sys
        self.n = sys.n
        self.d = sys.d
        self.V = [np.zeros((0, self.d)) for _ in range(self.n)]
        self.records: list[list[VertexRecord]] = [[] for _ in range(self.n)]
        self.R = [[] for _ in range(self.n)]
        self.seeds: list[tuple[int, np.ndarray]] = []
        self.add_seed(start_space, x0)
        self.mu = -math.inf
        self.mu_law = None
        self.lp_solves = 0
        self.merge_norm = 0.0  # largest norm among merged near-duplicates
        self._rho_cache: dict = {}

    def add_seed(self, j: int, x):
        root = VertexRecord(np.asarray(x, dtype=float), j, 0.0, (), FiniteSwitchingLaw(()), np.eye(self.d), j)
        self._add(j, root)
        self.R[j].append(root)
        self.seeds.append((j, root.point))

    def missing_direction(self) -> tuple[int, np.ndarray] | None:
        """A space whose polytope is flat and a direction outside it."""
        for j, V in enumerate(self.V):
            if PolytopeHull(V, self.cfg.hull).is_full_dimensional():
                continue
            scale = float(np.max(np.abs(V)))
            if self.cfg.hull == POSITIVE:
                k = int(np.argmin(V.max(axis=0)))
                return j, scale * np.eye(self.d)[k]
            _, _, Vt = np.linalg.svd(V, full_matrices=True)
            return j, scale * Vt[-1]
        return None

    def _add(self, j: int, rec: VertexRecord):
        self.V[j] = np.vstack([self.V[j], rec.point[None, :]])
        self.records[j].append(rec)

    def _is_duplicate(self, j: int, x, V) -> bool:
        if len(V) == 0:
            return False
        scale = max(float(np.linalg.norm(x)), 1e-300)
        tol = self.cfg.dedup_rtol * scale
        if np.min(np.linalg.norm(V - x, axis=1)) <= tol:
            return True
        if self.cfg.hull == SYMMETRIZED and np.min(np.linalg.norm(V + x, axis=1)) <= tol:
            return True
        return False

    def classify(self, j: int, x, V) -> tuple[bool, float]:
        """(alive, t0) for the point ``x`` against the hull of ``V``."""
        if len(V) == 0:
            return True, 0.0
        res = membership(PolytopeHull(V, self.cfg.hull), x, self.cfg.tol_strict)
        self.lp_solves += 1
        if res.interior:
            return False, res.t0
        if self._is_duplicate(j, x, V):
            self.merge_norm = max(self.merge_norm, res.norm)
            return False, res.t0
        return True, res.t0

    def update_mu(self, rec: VertexRecord):
        """Scan the loops closing at ``rec`` (earlier visits of the same space)."""
        fam = self.family
        j = rec.space
        P = np.eye(self.d)
        elapsed = 0.0
        steps = rec.steps
        for k in range(len(steps) - 1, -1, -1):
            mode, s = steps[k]
            P = P @ fam.generators[mode][s]
            elapsed += fam.duration(mode, s)
            # the node before leg k lives in the space of leg k-1 (or the root space)
            prev_space = steps[k - 1][0] if k > 0 else rec.root_space
            if prev_space == j and elapsed > 0:
                value = log_spectral_radius(P) / elapsed
                if value > self.mu:
                    self.mu = value
                    self.mu_law = FiniteSwitchingLaw(rec.history.legs[k:])

    def make_record(self, parent: VertexRecord, j: int, s: int, x) -> VertexRecord:
        fam = self.family
        dur = fam.duration(j, s)
        return VertexRecord(
            point=x,
            space=j,
            birth_time=parent.birth_time + dur,
            steps=parent.steps + ((j, s),),
            history=FiniteSwitchingLaw(parent.history.legs + ((j, dur),)),
            cumulative=fam.generators[j][s] @ parent.cumulative,
            root_space=parent.root_space,
        )


def run_algorithm1(
    sys: RestrictedSystem,
    config: EngineConfig | None = None,
    start_point=None,
    family: DiscretizedFamily | None = None,
    keep_records: bool = False,
) -> AlgorithmReport:
    """Build the invariant multi-polytope of the discretized system.

    Parameters
    ----------
    sys : RestrictedSystem
        Must have finite upper bounds and at least two modes.
    config : EngineConfig, optional
    start_point : array_like, optional
        Overrides the default start (see :func:`default_start`).
    family : DiscretizedFamily, optional
        Reuse precomputed generators (must match ``sys`` and ``config.N``).
    keep_records : bool
        Attach every vertex record (with its genealogy) to the report.

    Returns
    -------
    AlgorithmReport
    """
    cfg = config or EngineConfig()
    if sys.n < 2:
        raise ValueError("a restricted run needs at least two modes")
    if family is None:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ReducibleFamilyWarning)
            family = discretize(sys, cfg.N, check_irreducible=False)
    elif family.N != cfg.N or family.system is not sys:
        raise ValueError("family does not match the system and N")
    i, x0 = default_start(sys, family, cfg)
    if start_point is not None:
        x0 = np.asarray(start_point, dtype=float).ravel()
        if x0.shape != (sys.d,):
            raise ValueError("start point has the wrong dimension")
    if not np.any(x0):
        raise ValueError("start point must be nonzero")
    if cfg.hull == POSITIVE:
        if not sys.is_metzler():
            raise ValueError("positive hulls need Metzler modes")
        if np.any(x0 <= 0):
            raise ValueError("positive hulls need a componentwise positive start point")

    run = _Run(family, cfg, i, x0)
    n, N = sys.n, cfg.N
    case = None
    k = 0
    overflow = False

    while case is None:
        k += 1
        R_old = run.R
        run.R = [[] for _ in range(n)]
        snapshot = [V.copy() for V in run.V] if cfg.parallel else None
        try:
            for j in range(n):
                for q in range(n):
                    if q == j:
                        continue
                    for parent in R_old[q]:
                        for s in range(N + 1):
                            x = family.generators[j][s] @ parent.point
                            V = snapshot[j] if cfg.parallel else run.V[j]
                            alive, _ = run.classify(j, x, V)
                            if cfg.parallel and alive and run._is_duplicate(j, x, run.V[j]):
                                alive = False
                            if not alive:
                                continue
                            rec = run.make_record(parent, j, s, x)
                            run._add(j, rec)
                            run.R[j].append(rec)
                            run.update_mu(rec)
                            if run.mu > -cfg.delta:
                                case = UNSTABLE_CANDIDATE
                                break
                        if case:
                            break
                    if case:
                        break
                if case:
                    break
        except OverflowError:
            overflow = True
        if case:
            break
        if overflow or not np.all([np.all(np.isfinite(V)) for V in run.V]):
            # far above the exponent: points blew up before mu caught up
            case = INTERRUPTED
            overflow = True
            break
        if not any(run.R):
            # a reducible family leaves flat polytopes; the construction is a
            # closure from seeds, so a seed outside the span can be added
            gap = run.missing_direction() if len(run.seeds) < n * sys.d else None
            if gap is None:
                case = LYAPUNOV_CERTIFICATE
                break
            run.add_seed(*gap)
        log.debug("iteration %d: vertices %s, alive %s, mu %.6g", k, [len(V) for V in run.V],
                  [len(r) for r in run.R], run.mu)
        if k >= cfg.K_max or max(len(V) for V in run.V) > cfg.max_vertices:
            case = INTERRUPTED

    if case == LYAPUNOV_CERTIFICATE:
        polys = MultiPolytope(tuple(prune_redundant(V, cfg.hull) for V in run.V), cfg.hull)
    else:
        polys = MultiPolytope(tuple(V.copy() for V in run.V), cfg.hull)
    nu, nu_ref, gamma, curv = math.inf, math.inf, math.nan, ()
    if case in (LYAPUNOV_CERTIFICATE, INTERRUPTED) and not overflow:
        gamma = max(1.0, run.merge_norm)
        if case == INTERRUPTED:
            gamma = max(gamma, _extra_sweep(run))
        if polys.is_full_dimensional():
            curv = tuple(curvature_bound(polys.hull(j), A) for j, A in enumerate(sys.modes))
            nu = _upper_from(sys, family.taus, curv, gamma)
            if cfg.refine:
                nu_ref = _refined_upper(sys, family, polys, curv, cfg.refine)
                run.lp_solves += 2 * cfg.refine * cfg.N * sum(polys.vertex_counts) * (sys.n - 1)
    return AlgorithmReport(
        case=case,
        mu=run.mu,
        mu_law=run.mu_law,
        nu=nu,
        gamma=gamma,
        nu_refined=nu_ref,
        curvature=curv,
        polytopes=polys,
        iterations=k,
        vertex_counts=polys.vertex_counts,
        lp_solves=run.lp_solves,
        config=cfg,
        start_space=i,
        start_point=np.asarray(x0, dtype=float),
        records=tuple(tuple(r) for r in run.records) if keep_records else (),
        seeds=tuple(run.seeds),
    )


def _extra_sweep(run: _Run) -> float:
    """Largest norm, in the fixed final polytopes, of the images of the alive vertices.

    The genealogy of every image also feeds the lower bound.
    """
    fam = run.family
    n = run.n
    hulls = [PolytopeHull(V, run.cfg.hull) if len(V) else None for V in run.V]
    worst = 0.0
    for j in range(n):
        for q in range(n):
            if q == j:
                continue
            for parent in run.R[q]:
                for s in range(fam.N + 1):
                    x = fam.generators[j][s] @ parent.point
                    if hulls[j] is None:
                        return math.inf
                    res = membership(hulls[j], x, run.cfg.tol_strict)
                    run.lp_solves += 1
                    worst = max(worst, res.norm)
                    if not res.interior:
                        run.update_mu(run.make_record(parent, j, s, x))
    return worst


def _upper_from(sys: RestrictedSystem, taus, curv, gamma: float) -> float:
    """``max_j (ln gamma - ln(1 - tau_j^2 K_j / 8)) / m_j``, or ``inf``."""
    best = -math.inf
    for m, tau, K in zip(sys.lower, taus, curv):
        arg = tau * tau * K / 8.0
        if arg >= 1.0 or not math.isfinite(gamma):
            return math.inf
        best = max(best, (math.log(gamma) - math.log1p(-arg)) / m)
    return best


def _growth_rate(hull: PolytopeHull, A) -> float:
    """``beta`` with ``|e^{uA} x|_P <= e^{u beta} |x|_P`` for ``u >= 0``.

    Positive hulls use ``A + cI >= 0`` (Metzler shift), whose induced norm
    on the orthant is given by the vertex formula.
    """
    if hull.strategy == SYMMETRIZED:
        return operator_norm(hull, A)
    c = max(0.0, -float(np.min(np.diag(A))))
    return operator_norm(hull, A + c * np.eye(A.shape[0])) - c


def _refined_upper(sys: RestrictedSystem, family: DiscretizedFamily, polys: MultiPolytope, curv, r: int) -> float:
    """Upper bound from vertex images sampled with step ``h = tau_j / r``.

    Let ``y_k`` be the samples of ``e^{t A_j} x`` over vertices ``x`` of
    the other polytopes and ``t in [m_j, M_j]``. Between two samples the
    trajectory leaves the chord by at most ``h^2 / 8`` times the largest
    second derivative, and ``y''(a + u) = e^{u A_j} A_j^2 y_k``. Each
    interval is therefore bounded by the smaller of

    * ``max(|y_k|, |y_k+1|) / (1 - h^2 K_j / 8)`` (uniform curvature),
    * ``max(|y_k|, |y_k+1|) + h^2 / 8 e^{h beta_j} |w_k|`` with
      ``w_k = A_j^2 y_k`` (``(-A_j^2 y_k)^+`` for positive hulls).

    With ``g_j`` the largest interval bound every admissible leg in mode
    ``j`` grows the multinorm by at most ``g_j``; a leg lasts at least
    ``m_j`` (at most ``M_j``), so the exponent is at most
    ``max_j ln(g_j) / m_j`` (``/ M_j`` when ``g_j < 1``).
    """
    best = -math.inf
    for j, A in enumerate(sys.modes):
        m, M, h = sys.lower[j], sys.upper[j], family.taus[j] / r
        arg = h * h * curv[j] / 8.0
        uniform = 1.0 / (1.0 - arg) if arg < 1.0 else math.inf
        hull = polys.hull(j)
        step = expm(A, h)
        A2 = A @ A
        bend = h * h / 8.0 * math.exp(h * max(0.0, _growth_rate(hull, A)))
        g = 0.0
        for q in range(sys.n):
            if q == j:
                continue
            for x in polys.vertices[q]:
                y = family.generators[j][0] @ x
                prev = None
                for k in range(family.N * r + 1):
                    if k:
                        y = step @ y
                    cur = point_norm(hull, y)
                    if prev is not None:
                        top = max(prev[0], cur)
                        g = max(g, min(top * uniform, top + prev[1]))
                    w = A2 @ y
                    if hull.strategy == POSITIVE:
                        w = np.maximum(-w, 0.0)
                    prev = (cur, bend * point_norm(hull, w))
        if g == 0.0:
            continue
        c = math.log(g)
        best = max(best, c / m if c >= 0 else c / M)
    return best


# --- bisection --------------------------------------------------------------

@dataclass(frozen=True)
class BisectionStep:
    alpha: float
    case: str
    mu: float
    nu: float
    upper: float
    iterations: int
    vertex_counts: tuple


@dataclass(frozen=True, eq=False)
class SigmaInterval:
    """Certified enclosure ``lo <= sigma(S) <= hi`` with its provenance.

    ``lower_law`` is a periodic law whose growth rate equals ``lo`` (when the
    lower end came from a law and not from the initial bracket).
    ``upper_report`` is the run that produced ``hi`` and ``upper_shift`` the
    shift it was run at.
    """

    lo: float
    hi: float
    lower_law: FiniteSwitchingLaw | None
    upper_report: AlgorithmReport | None
    upper_shift: float
    steps: tuple
    initial: tuple
    config: EngineConfig

    @property
    def width(self) -> float:
        return self.hi - self.lo

    @property
    def verdict(self) -> str:
        if self.hi < 0:
            return "STABLE"
        if self.lo > 0:
            return "UNSTABLE"
        return "UNDECIDED"

    def contains(self, value: float, tol: float = 0.0) -> bool:
        return self.lo - tol <= value <= self.hi + tol

    def to_dict(self) -> dict:
        return {
            "lo": _num(self.lo),
            "hi": _num(self.hi),
            "width": _num(self.width),
            "verdict": self.verdict,
            "initial": [_num(v) for v in self.initial],
            "lower_law": law_to_json(self.lower_law) if self.lower_law is not None else None,
            "upper_shift": _num(self.upper_shift),
            "upper_report": self.upper_report.to_dict() if self.upper_report is not None else None,
            "steps": [
                {"alpha": s.alpha, "case": s.case, "mu": _num(s.mu), "nu": _num(s.nu),
                 "upper": _num(s.upper), "iterations": s.iterations, "vertex_counts": list(s.vertex_counts)}
                for s in self.steps
            ],
            "config": self.config.to_dict(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"


def bisect_sigma(
    sys: RestrictedSystem,
    config: EngineConfig | None = None,
    target_width: float = 0.01,
    max_steps: int = 40,
    lower_hint: tuple[float, FiniteSwitchingLaw | None] | None = None,
    stop_on_sign: bool = False,
    min_shift_gap: float = 1e-7,
) -> SigmaInterval:
    """Localise the exponent by runs on shifted systems ``A_j - alpha I``.

    The initial bracket comes from logarithmic norms (valid for every
    switching law), tightened by ``lower_hint``. A run at shift ``alpha``
    that finds a loop with rate ``mu`` raises the lower end to ``alpha + mu``;
    a certificate with inflation ``nu`` lowers the upper end to
    ``alpha + nu``. Interrupted runs contribute both, with the weaker
    interrupted upper bound.

    Parameters
    ----------
    target_width : float
        Stop once ``hi - lo <= target_width``. Widths below ``delta + nu``
        cannot be reached.
    max_steps : int
        Budget of runs; on exhaustion the best interval so far is returned.
    lower_hint : (value, law), optional
        A known lower bound, e.g. from periodic-law enumeration.
    stop_on_sign : bool
        Stop as soon as the sign of the exponent is settled.
    min_shift_gap : float
        Stop when the bracket of candidate shifts is this narrow
        (relative) or narrower than ``delta / 4``; the width is then
        limited by ``nu`` at this ``N``.
    """
    cfg = config or EngineConfig()
    if not target_width > 0:
        raise ValueError("target_width must be positive")
    lo, hi = lognorm_bracket(sys.modes)
    initial = (lo, hi)
    lo_law = None
    if lower_hint is not None and lower_hint[0] > lo:
        lo, lo_law = float(lower_hint[0]), lower_hint[1]
    upper_report, upper_shift = None, math.nan
    steps = []
    # the shifted generators differ from the originals by a scalar factor
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ReducibleFamilyWarning)
        base = discretize(sys, cfg.N, check_irreducible=False)
    # shifts are bisected between the lower end (or the last undecided
    # shift) and the smallest shift that produced a certificate
    floor, ceiling = lo, hi
    while hi - lo > target_width and len(steps) < max_steps:
        if stop_on_sign and (lo > 0 or hi < 0):
            break
        floor = max(floor, lo)
        # below delta the halting rule, not the shift, decides the run
        if ceiling - floor <= max(min_shift_gap * max(1.0, abs(ceiling)), 0.25 * cfg.delta):
            break
        alpha = 0.5 * (floor + ceiling)
        shifted = sys.shifted(alpha)
        rep = run_algorithm1(shifted, cfg, family=_shift_family(base, shifted, alpha))
        steps.append(BisectionStep(alpha, rep.case, rep.mu, rep.nu, rep.upper, rep.iterations, rep.vertex_counts))
        log.info("alpha=%.8g case=%s mu=%.4g nu=%.4g it=%d verts=%s", alpha, rep.case, rep.mu, rep.nu,
                 rep.iterations, rep.vertex_counts)
        if math.isfinite(rep.mu) and alpha + rep.mu > lo:
            lo, lo_law = alpha + rep.mu, rep.mu_law
        if math.isfinite(rep.upper) and alpha + rep.upper < hi:
            hi, upper_report, upper_shift = alpha + rep.upper, rep, alpha
        if rep.case == LYAPUNOV_CERTIFICATE:
            ceiling = min(ceiling, alpha)
        else:
            floor = max(floor, alpha)
        ceiling = min(ceiling, hi)
    return SigmaInterval(lo, hi, lo_law, upper_report, upper_shift, tuple(steps), initial, cfg)


def _shift_family(base: DiscretizedFamily, shifted: RestrictedSystem, alpha: float) -> DiscretizedFamily:
    gens = tuple(
        tuple(G * math.exp(-alpha * base.duration(j, s)) for s, G in enumerate(gs))
        for j, gs in enumerate(base.generators)
    )
    return DiscretizedFamily(shifted, base.N, base.taus, gens, base.irreducible, base.witness)


# --- a-posteriori audit -----------------------------------------------------

@dataclass(frozen=True)
class LyapunovAudit:
    """Result of :func:`check_lyapunov_multinorm`.

    ``worst`` is ``(q, j, t, x)``: the donor space, receiving mode, time
    offset past ``m_j`` and vertex realising ``worst_norm``.
    """

    passed: bool
    worst_norm: float
    worst: tuple | None

    @property
    def margin(self) -> float:
        return 1.0 - self.worst_norm


def check_lyapunov_multinorm(
    sys: RestrictedSystem, polytopes: MultiPolytope, shift: float, grid: int = 200
) -> LyapunovAudit:
    """Check on a time grid that the multinorm decreases for ``A_j - shift I``.

    For every vertex ``x`` of every polytope ``P_q``, every mode ``j != q``
    and ``t`` on ``grid + 1`` points of ``[0, M_j - m_j]``, the image
    ``e^{(m_j + t)(A_j - shift I)} x`` must have norm below 1 in ``P_j``.
    """
    if not polytopes.is_full_dimensional():
        raise ValueError("polytopes must be full-dimensional")
    if not sys.finite_upper:
        raise InfiniteBoundError("audit needs finite upper bounds")
    worst_norm, worst = -math.inf, None
    for j, A in enumerate(sys.modes):
        m, M = sys.lower[j], sys.upper[j]
        hull = polytopes.hull(j)
        ts = np.linspace(0.0, M - m, grid + 1)
        step = expm(A, ts[1] - ts[0]) if grid > 0 else np.eye(sys.d)
        for q in range(sys.n):
            if q == j:
                continue
            for x in polytopes.vertices[q]:
                y = expm(A, m) @ x
                for k, t in enumerate(ts):
                    if k:
                        y = step @ y
                    val = point_norm(hull, y) * math.exp(-shift * (m + t))
                    if val > worst_norm:
                        worst_norm, worst = val, (q, j, float(t), np.array(x))
    return LyapunovAudit(bool(worst_norm < 1.0), float(worst_norm), worst)
