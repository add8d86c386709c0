import numpy as np
import pytest
from hypothesis import given, strategies as st

import multinorm.lpcore as lpcore
from multinorm.lpcore import (
    POSITIVE,
    LPFailure,
    SYMMETRIZED,
    PolytopeHull,
    membership,
    operator_norm,
    point_norm,
)

from geometry import gauge, positive_facets, symmetrized_facets

CROSS = PolytopeHull(np.eye(2), SYMMETRIZED)


def test_cross_polytope_membership():
    r = membership(CROSS, [0.25, 0.25])
    assert r.t0 == pytest.approx(2.0, abs=1e-12) and r.interior
    r = membership(CROSS, [1.0, 1.0])
    assert r.t0 == pytest.approx(0.5, abs=1e-12) and r.status == "exterior"


def test_positive_simplex_membership():
    # ray (0.3, 0.3) meets x1 + x2 = 1 at t = 1 / 0.6
    r = membership(PolytopeHull(np.eye(2), POSITIVE), [0.3, 0.3])
    assert r.t0 == pytest.approx(5 / 3, abs=1e-12) and r.interior


def test_boundary_band_reported_distinctly():
    assert membership(CROSS, [0.5, 0.5]).status == "boundary"
    assert membership(CROSS, [0.5, 0.5 + 1e-12]).status == "boundary"
    assert membership(CROSS, [0.5, 0.5 - 1e-6]).status == "interior"


def test_point_norm_examples():
    assert point_norm(CROSS, [0.25, 0.25]) == pytest.approx(0.5, abs=1e-12)
    assert point_norm(CROSS, [1.0, 1.0]) == pytest.approx(2.0, abs=1e-12)
    assert point_norm(CROSS, [0.0, 0.0]) == 0.0
    assert point_norm(PolytopeHull(np.eye(2), POSITIVE), [0.0, 0.0]) == 0.0


def test_zero_point_in_flat_hull_is_not_interior():
    flat = PolytopeHull(np.array([[1.0, 1.0]]), SYMMETRIZED)
    assert not membership(flat, [0.0, 0.0]).interior
    assert membership(CROSS, [0.0, 0.0]).interior


def test_operator_norm_examples():
    assert operator_norm(CROSS, 2 * np.eye(2)) == pytest.approx(2.0, abs=1e-12)
    assert operator_norm(CROSS, np.diag([1.0, 3.0])) == pytest.approx(3.0, abs=1e-12)


def test_operator_norm_against_boundary_sampling():
    V = np.array([[1.0, 0.0], [1.0, 1.0]])
    hull = PolytopeHull(V, SYMMETRIZED)
    A = np.array([[0.0, 1.0], [1.0, 0.0]])
    eqs = symmetrized_facets(V)
    corners = np.array([[1, 0], [1, 1], [-1, 0], [-1, -1], [1, 0]], dtype=float)
    # the hexagon is co{+-(1,0), +-(1,1)}; sample its boundary edges densely
    poly = np.vstack([V, -V])
    ang = np.arctan2(poly[:, 1], poly[:, 0])
    poly = poly[np.argsort(ang)]
    pts = []
    for a, b in zip(poly, np.roll(poly, -1, axis=0)):
        s = np.linspace(0, 1, 2500, endpoint=False)[:, None]
        pts.append(a + s * (b - a))
    pts = np.vstack(pts)
    sampled = max(gauge(eqs, A @ p) / gauge(eqs, p) for p in pts)
    assert corners.shape[0] == 5
    assert operator_norm(hull, A) == pytest.approx(sampled, rel=1e-9)


def _random_hull(rng, strategy):
    k = int(rng.integers(2, 7))
    if strategy == SYMMETRIZED:
        V = rng.standard_normal((k, 2))
    else:
        V = rng.uniform(0, 1, (k, 2))
        V[0] = [rng.uniform(0.2, 1), 0.0]
        V[1] = [0.0, rng.uniform(0.2, 1)]
    return V


@pytest.mark.parametrize("strategy", [SYMMETRIZED, POSITIVE])
def test_membership_agrees_with_half_plane_oracle(strategy):
    rng = np.random.default_rng(2024 if strategy == SYMMETRIZED else 2025)
    checked = 0
    for _ in range(1000):
        V = _random_hull(rng, strategy)
        eqs = symmetrized_facets(V) if strategy == SYMMETRIZED else positive_facets(V)
        x = rng.standard_normal(2) if strategy == SYMMETRIZED else rng.uniform(0, 1.2, 2)
        g = gauge(eqs, x)
        r = membership(PolytopeHull(V, strategy), x)
        assert r.norm == pytest.approx(g, rel=1e-9, abs=1e-12)
        if abs(g - 1.0) > 1e-9:
            assert r.interior == (g < 1.0)
            checked += 1
    assert checked > 990


def test_multipliers_satisfy_constraints(rng):
    for _ in range(200):
        V = rng.standard_normal((5, 3))
        x = rng.standard_normal(3)
        r = membership(PolytopeHull(V, SYMMETRIZED), x)
        assert np.all(r.t >= -1e-12) and np.all(r.s >= -1e-12)
        assert abs(r.t.sum() + r.s.sum() - 1.0) <= 1e-9
        assert np.allclose(r.t0 * x, V.T @ (r.t - r.s), atol=1e-9)
        p = r.functional
        assert np.max(np.abs(V @ p)) <= 1 + 1e-9
        assert p @ x == pytest.approx(r.norm, rel=1e-9)


def test_positive_multipliers_satisfy_constraints(rng):
    for _ in range(200):
        V = rng.uniform(0, 1, (4, 3)) + 0.05
        x = rng.uniform(0, 1, 3)
        r = membership(PolytopeHull(V, POSITIVE), x)
        assert abs(r.t.sum() - 1.0) <= 1e-9
        assert np.all(r.s <= 1e-12)
        assert np.allclose(r.t0 * x, V.T @ r.t + r.s, atol=1e-9)


@given(st.integers(0, 10_000), st.floats(0.01, 100))
def test_point_norm_is_homogeneous(seed, lam):
    rng = np.random.default_rng(seed)
    hull = PolytopeHull(rng.standard_normal((4, 3)), SYMMETRIZED)
    x = rng.standard_normal(3)
    assert point_norm(hull, lam * x) == pytest.approx(lam * point_norm(hull, x), rel=1e-10)


@given(st.integers(0, 10_000))
def test_adding_vertex_never_increases_norm(seed):
    rng = np.random.default_rng(seed)
    V = rng.standard_normal((4, 3))
    extra = rng.standard_normal((1, 3))
    for _ in range(5):
        x = rng.standard_normal(3)
        before = point_norm(PolytopeHull(V, SYMMETRIZED), x)
        after = point_norm(PolytopeHull(np.vstack([V, extra]), SYMMETRIZED), x)
        assert after <= before * (1 + 1e-10)


@given(st.integers(0, 10_000))
def test_operator_norm_submultiplicative(seed):
    rng = np.random.default_rng(seed)
    hull = PolytopeHull(rng.standard_normal((5, 3)), SYMMETRIZED)
    A = rng.standard_normal((3, 3))
    assert operator_norm(hull, A @ A) <= operator_norm(hull, A) ** 2 + 1e-9


def test_dimension_mismatch_rejected():
    with pytest.raises(ValueError):
        membership(CROSS, [1.0, 2.0, 3.0])


def test_positive_hull_rejects_negative_vertices():
    with pytest.raises(ValueError):
        PolytopeHull(np.array([[1.0, -0.1]]), POSITIVE)


def test_fallback_solver_matches_simplex(rng, monkeypatch):
    V = rng.standard_normal((6, 3))
    hull = PolytopeHull(V, SYMMETRIZED)
    points = rng.standard_normal((10, 3))
    direct = [membership(hull, x) for x in points]

    def broken(*args):
        raise LPFailure("singular basis", 0)

    monkeypatch.setattr(lpcore, "_simplex", broken)
    for x, res in zip(points, direct):
        alt = membership(hull, x)
        assert alt.norm == pytest.approx(res.norm, rel=1e-9)
        assert alt.functional @ x == pytest.approx(alt.norm, rel=1e-7)
