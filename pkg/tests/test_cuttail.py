import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.spatial import ConvexHull, Delaunay

from multinorm.cuttail import (
    CLOSED_FORM_COMPLEX,
    CLOSED_FORM_REAL,
    CONVEX_PROGRAM,
    CutTailProgram,
    find_t_cut,
    is_cut_tail,
    simplify_bounds,
    t_cut_2d_complex,
    t_cut_2d_real,
)
from multinorm.engine import bisect_sigma
from multinorm.numlin import expm
from multinorm.sysmodel import RestrictedSystem

from conftest import random_stable

mpmath.mp.dps = 40


def real_root(a1, a2):
    f = lambda t: (1 + mpmath.exp(-a1 * t)) / a1 - (1 + mpmath.exp(-a2 * t)) / a2
    return float(mpmath.findroot(f, (mpmath.mpf("0.01"), mpmath.mpf(5)), solver="illinois"))


def complex_root(alpha, beta, bracket):
    g = lambda t: alpha * mpmath.sin(beta * t) + beta * mpmath.cos(beta * t) + beta * mpmath.exp(alpha * t)
    return float(mpmath.findroot(g, bracket, solver="illinois"))


def test_real_closed_form_ln_one_plus_sqrt2():
    assert t_cut_2d_real(-1, -2) == pytest.approx(float(mpmath.log(1 + mpmath.sqrt(2))), abs=1e-12)


def test_real_closed_form_minus1_minus3_is_ln2():
    # 3 (1 + u) = 1 + u^3 with u = e^t factors as (u - 2)(u + 1)^2
    assert t_cut_2d_real(-1, -3) == pytest.approx(real_root(-1, -3), abs=1e-12)
    assert t_cut_2d_real(-1, -3) == pytest.approx(math.log(2), abs=1e-12)


@given(st.floats(-5, -0.05), st.floats(-5, -0.05))
def test_real_closed_form_symmetric_and_exact(a, b):
    if abs(a - b) < 1e-3:
        return
    t = t_cut_2d_real(a, b)
    assert t == t_cut_2d_real(b, a)
    lhs, rhs = (1 + math.exp(-a * t)) / a, (1 + math.exp(-b * t)) / b
    assert abs(lhs - rhs) <= 1e-10 * max(abs(lhs), 1.0)


def test_complex_closed_form():
    ref = complex_root(-1, 1, (mpmath.mpf(1), mpmath.mpf("1.1")))
    assert t_cut_2d_complex(-1, 1) == pytest.approx(ref, abs=1e-12)
    assert t_cut_2d_complex(-1, 1) == pytest.approx(1.0386, abs=5e-4)


@given(st.floats(-3, -0.05), st.floats(0.1, 4), st.floats(0.2, 5))
def test_complex_closed_form_time_scaling(alpha, beta, c):
    assert t_cut_2d_complex(alpha, beta) == pytest.approx(t_cut_2d_complex(alpha / c, beta / c) / c, rel=1e-10)


def test_complex_root_tends_to_pi():
    roots = [t_cut_2d_complex(-eps, 1.0) for eps in (0.5, 0.1, 0.01, 1e-4, 1e-8)]
    assert all(a < b for a, b in zip(roots, roots[1:]))
    assert roots[-1] == pytest.approx(math.pi, abs=1e-3)
    for eps, r in zip((0.5, 0.1, 0.01), roots):
        assert r == pytest.approx(complex_root(-eps, 1.0, (r - 0.05, r + 0.05)), abs=1e-10)


def test_find_t_cut_dispatch():
    r = find_t_cut(np.diag([-1.0, -2.0]))
    assert r.method == CLOSED_FORM_REAL and r.T_cut == pytest.approx(0.881374, abs=1e-6)
    r = find_t_cut(np.array([[-1.0, 1.0], [-1.0, -1.0]]))
    assert r.method == CLOSED_FORM_COMPLEX and r.T_cut == pytest.approx(1.0386, abs=5e-4)
    r = find_t_cut(np.diag([-1.0, -2.0]), method=CONVEX_PROGRAM)
    assert r.method == CONVEX_PROGRAM and r.T_cut == pytest.approx(math.log(1 + math.sqrt(2)), abs=1e-6)
    with pytest.raises(ValueError):
        find_t_cut(np.diag([1.0, -2.0]))


def test_repeated_eigenvalue_falls_back_to_program():
    r = find_t_cut(np.array([[-1.0, 1.0], [0.0, -1.0]]))
    assert r.method == CONVEX_PROGRAM and r.T_cut > 0
    assert is_cut_tail(np.array([[-1.0, 1.0], [0.0, -1.0]]), r.T_cut + 0.01)


def test_is_cut_tail_examples():
    A = np.diag([-1.0, -2.0])
    assert is_cut_tail(A, 2 * math.log(1 + math.sqrt(2)))
    assert not is_cut_tail(A, 0.0)
    assert is_cut_tail(np.array([[-1.0, 1.0], [-1.0, -1.0]]), 2.0)
    with pytest.raises(ValueError):
        is_cut_tail(np.diag([0.1, -1.0]), 1.0)


@pytest.mark.parametrize("seed", [1, 2])
def test_three_dimensional_bracketing(seed):
    A = random_stable(np.random.default_rng(seed), 3)
    T = find_t_cut(A).T_cut
    assert is_cut_tail(A, T + 0.01)
    assert is_cut_tail(A, T - 0.01).status == "not_cut_tail"


def test_similarity_invariance():
    rng = np.random.default_rng(3)
    A = random_stable(rng, 3)
    Q = np.eye(3) + 0.3 * rng.standard_normal((3, 3))
    B = Q @ A @ np.linalg.inv(Q)
    assert find_t_cut(B).T_cut == pytest.approx(find_t_cut(A).T_cut, abs=1e-6)


def test_program_value_monotone_past_threshold():
    A = np.array([[-0.5, 2.0], [-1.0, -1.5]])
    T = find_t_cut(A).T_cut
    prog = CutTailProgram(A)
    vals = [prog.value(t)[0] for t in np.linspace(T, 3 * T, 8)]
    assert all(b <= a + 1e-7 for a, b in zip(vals, vals[1:]))


def _geometric_verdict(A, T, x0):
    """Is the sampled arc after T inside the sampled hull of G(0, T)?"""
    ts = np.linspace(0, T, 800)
    arc = np.array([expm(A, t) @ x0 for t in ts])
    hull = Delaunay(np.vstack([arc, -arc])[ConvexHull(np.vstack([arc, -arc])).vertices])
    rate = -max(np.linalg.eigvals(A).real)
    # exits happen just after T or far out; sample both densely
    tail = np.array([expm(A, T + h) @ x0 for h in np.geomspace(1e-6 * T, 30 / rate, 3000)])
    return bool(np.all(hull.find_simplex(tail) >= 0))


def test_geometric_cross_check():
    rng = np.random.default_rng(11)
    agree = total = 0
    for _ in range(25):
        A = random_stable(rng, 2)
        T = find_t_cut(A).T_cut
        x0 = rng.standard_normal(2)
        for f in (0.95, 1.05):
            total += 1
            agree += bool(is_cut_tail(A, f * T)) == _geometric_verdict(A, f * T, x0)
    assert agree / total >= 0.99


def test_simplify_reduce_and_cancel():
    A = np.diag([-1.0, -2.0])
    B = np.array([[-1.0, 1.0], [-1.0, -1.0]])
    sys = RestrictedSystem((A, B), (1.0, 1.0), (5.0, 1.5))
    new, log = simplify_bounds(sys, "reduce")
    assert new.upper[0] == pytest.approx(1.881374, abs=1e-6)
    assert new.upper[1] == 1.5 and log[1].action == "unchanged"
    new, log = simplify_bounds(sys, "cancel")
    assert new.upper[0] == math.inf and log[0].action == "cancelled"


def test_simplify_skips_unstable_mode():
    sys = RestrictedSystem((np.diag([0.5, -1.0]), np.diag([-1.0, -2.0])), (1.0, 1.0), (5.0, 5.0))
    with pytest.warns(UserWarning, match="not stable"):
        new, log = simplify_bounds(sys)
    assert new.upper[0] == 5.0 and log[0].action == "skipped" and log[0].reason == "unstable"
    assert log[1].action == "reduced"


def test_reduced_bounds_keep_stability_and_order():
    rng = np.random.default_rng(8)
    for _ in range(3):
        mats = [random_stable(rng, 2, margin=0.05) for _ in range(2)]
        t_cut = max(find_t_cut(A).T_cut for A in mats)
        sys = RestrictedSystem.uniform(mats, 1.0, 1.0 + t_cut + 0.5)
        reduced, _ = simplify_bounds(sys, "reduce")
        orig, red = bisect_sigma(sys, target_width=0.05), bisect_sigma(reduced, target_width=0.05)
        assert orig.verdict == red.verdict == "STABLE"
        # fewer admissible laws can only lower the exponent
        assert red.lo <= orig.hi
