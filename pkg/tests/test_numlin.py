import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, strategies as st

from multinorm.numlin import (
    expm,
    invariant_closure,
    is_irreducible,
    leading_schur_vector,
    lognorm_bracket,
    spectral_abscissa,
    spectral_radius,
    spectrum,
)

from conftest import TABLE_A1, TABLE_A2


def stable_matrices(min_d=2, max_d=6):
    """Random (hence generically diagonalisable) stable matrices."""

    def build(args):
        seed, d = args
        A = np.random.default_rng(seed).standard_normal((d, d))
        return A - (np.max(np.linalg.eigvals(A).real) + 0.1) * np.eye(d)

    return st.tuples(st.integers(0, 2**32 - 1), st.integers(min_d, max_d)).map(build)


def test_expm_zero_time_is_exact_identity():
    A = np.array([[3.0, -7.0], [1e3, 2.0]])
    assert np.array_equal(expm(A, 0.0), np.eye(2))


def test_expm_diagonal():
    E = expm(np.diag([1.0, -3.0]), 1.0)
    assert np.allclose(E, np.diag([math.e, math.exp(-3)]), rtol=1e-14, atol=0)


@pytest.mark.parametrize("t", [0.3, 1.0, math.pi / 2, 2.5])
def test_expm_rotation_generator(t):
    E = expm(np.array([[0.0, -1.0], [1.0, 0.0]]), t)
    R = np.array([[math.cos(t), -math.sin(t)], [math.sin(t), math.cos(t)]])
    assert np.allclose(E, R, atol=1e-14)


def test_expm_matches_high_precision_series():
    A = TABLE_A1 + TABLE_A2
    ref = mpmath.expm(mpmath.matrix((1.7 * A).tolist()))
    ref = np.array(ref.tolist(), dtype=float)
    assert np.linalg.norm(expm(A, 1.7) - ref, 2) <= 1e-12 * np.linalg.norm(ref, 2)


def test_expm_overflow_is_signalled():
    with pytest.raises(OverflowError):
        expm(np.eye(2) * 1000.0, 10.0)


def test_expm_negative_time_inverts():
    A = TABLE_A1
    assert np.allclose(expm(A, -1.3) @ expm(A, 1.3), np.eye(2), atol=1e-14)


@given(stable_matrices(), st.floats(0, 3), st.floats(0, 3))
def test_expm_semigroup(A, s, t):
    lhs = expm(A, s + t)
    rhs = expm(A, s) @ expm(A, t)
    assert np.linalg.norm(lhs - rhs, 2) <= 1e-10 * max(np.linalg.norm(lhs, 2), 1e-300) + 1e-14


def test_spectral_abscissa_examples():
    assert spectral_abscissa(np.diag([1.0, -3.0])) == 1.0
    assert spectral_abscissa(np.array([[0.0, -1.0], [1.0, 0.0]])) == pytest.approx(0.0, abs=1e-15)
    # characteristic polynomial l^2 + 0.7 l + 0.02
    root = (-0.7 + math.sqrt(0.7**2 - 4 * 0.02)) / 2
    assert spectral_abscissa(TABLE_A1) == pytest.approx(root, abs=1e-13)
    assert round(root, 5) == -0.02984


def test_spectrum_is_conjugation_closed():
    A = np.array([[-1.0, 2.0, 0.0], [-2.0, -1.0, 0.0], [0.0, 0.0, -0.5]])
    ev = spectrum(A)
    assert len(ev) == 3
    assert np.allclose(np.sort_complex(ev), np.sort_complex(ev.conj()))


@given(stable_matrices(), st.floats(-5, 5))
def test_abscissa_shift(A, alpha):
    d = A.shape[0]
    assert spectral_abscissa(A - alpha * np.eye(d)) == pytest.approx(spectral_abscissa(A) - alpha, abs=1e-9)


@given(stable_matrices(), st.floats(0.01, 3))
def test_radius_of_exponential(A, t):
    assert spectral_radius(expm(A, t)) == pytest.approx(math.exp(t * spectral_abscissa(A)), rel=1e-9)


def test_spectral_radius_examples():
    assert spectral_radius(np.eye(3)) == 1.0
    assert spectral_radius(np.diag([math.exp(-1), math.exp(-5)])) == pytest.approx(math.exp(-1), rel=1e-15)
    a = 2.0
    P = expm(np.array([[0.0, -1.0], [1.0, 0.0]]), math.pi) @ expm(np.diag([-1.0, -a]), math.pi)
    assert spectral_radius(P) == pytest.approx(math.exp(-math.pi), rel=1e-12)


def test_reducible_pair_has_axis_witness():
    res = is_irreducible([np.diag([1.0, -3.0]), np.diag([-3.0, 1.0])])
    assert not res.irreducible
    w = res.witness[:, 0]
    assert w.shape == (2,)
    assert min(abs(w[0]), abs(w[1])) < 1e-12  # a coordinate axis


def test_table_pair_is_irreducible():
    # brute force: an invariant line is an eigenvector of each member
    for A, B in ((TABLE_A1, TABLE_A2), (TABLE_A2, TABLE_A1)):
        _, vecs = np.linalg.eig(A)
        for v in vecs.T:
            w = B @ v.real
            assert abs(v.real[0] * w[1] - v.real[1] * w[0]) > 1e-3
    assert is_irreducible([TABLE_A1, TABLE_A2]).irreducible


def test_singleton_is_reducible():
    res = is_irreducible([TABLE_A1])
    assert not res.irreducible
    Q = res.witness
    assert np.allclose((np.eye(2) - Q @ Q.T) @ TABLE_A1 @ Q, 0, atol=1e-10)


def test_dimension_mismatch_rejected():
    with pytest.raises(ValueError):
        is_irreducible([np.eye(2), np.eye(3)])


@given(st.integers(0, 10_000), st.integers(2, 4), st.booleans())
def test_irreducibility_similarity_invariant(seed, d, reducible):
    rng = np.random.default_rng(seed)
    fam = [rng.standard_normal((d, d)) for _ in range(2)]
    if reducible:
        for A in fam:
            A[1:, 0] = 0.0  # e1 is a common eigenvector
    Q, _ = np.linalg.qr(rng.standard_normal((d, d)))
    conj = [Q @ A @ Q.T for A in fam]
    assert is_irreducible(fam).irreducible == is_irreducible(conj).irreducible == (not reducible)


def test_invariant_closure_of_common_eigenvector():
    Q, _ = invariant_closure([np.diag([1.0, 2.0, 3.0]), np.diag([4.0, 5.0, 6.0])], np.array([1.0, 0.0, 0.0]))
    assert Q.shape == (3, 1)


def test_leading_schur_vector_spans_dominant_eigenvector():
    v = leading_schur_vector(TABLE_A2)
    assert np.allclose(np.abs(v), [0.0, 1.0])


@given(stable_matrices(2, 4), st.floats(0.05, 2))
def test_lognorm_bracket_bounds_growth(A, t):
    lo, hi = lognorm_bracket([A])
    x = np.ones(A.shape[0])
    r = np.linalg.norm(expm(A, t) @ x) / np.linalg.norm(x)
    assert math.exp(lo * t) * (1 - 1e-12) <= r <= math.exp(hi * t) * (1 + 1e-12)
