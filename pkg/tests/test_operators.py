import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from dtnhomog import BulkField, make_grid
from dtnhomog.exceptions import BoundaryNode, NonSymmetricInput
from dtnhomog.grid import bulk_from_function
from dtnhomog.operators import (
    bellman,
    discrete_hessian,
    discrete_hessians,
    ellipticity_sandwich_check,
    evaluate_F,
    laplacian,
    linear,
    make_operator,
    policy,
    pucci,
    pucci_minus,
    pucci_plus,
    random_admissible_matrix,
    random_bellman,
)

LAM, BIG = 1.0, 2.0


def _sym(dim):
    return arrays(np.float64, (dim, dim), elements=st.floats(-50, 50)).map(lambda a: (a + a.T) / 2)


def _all_ops(seed=0):
    rng = np.random.default_rng(seed)
    return [
        linear(random_admissible_matrix(rng, 2, LAM, BIG), LAM, BIG),
        pucci_minus(LAM, BIG),
        pucci_plus(LAM, BIG),
        random_bellman(rng, 2, LAM, BIG),
        bellman([[random_admissible_matrix(rng, 2, LAM, BIG) for _ in range(3)], [np.eye(2)]], LAM, BIG, outer="max"),
    ]


def test_pucci_values():
    H = np.diag([1.0, -1.0])
    assert evaluate_F(pucci_plus(1, 2), H) == pytest.approx(1.0)
    assert evaluate_F(pucci_minus(1, 2), H) == pytest.approx(-1.0)


@pytest.mark.parametrize("op", _all_ops(), ids=lambda o: o.kind)
def test_zero_matrix(op):
    assert evaluate_F(op, np.zeros((2, 2))) == 0.0


def test_three_by_three_pucci():
    H = np.diag([3.0, -1.0, 0.5])
    assert evaluate_F(pucci_plus(1, 2), H) == pytest.approx(2 * 3.5 - 1)
    R = np.linalg.qr(np.random.default_rng(0).normal(size=(3, 3)))[0]
    assert evaluate_F(pucci_minus(1, 2), R @ H @ R.T) == pytest.approx(3.5 - 2)


def test_non_symmetric_rejected():
    with pytest.raises(NonSymmetricInput):
        evaluate_F(pucci_plus(), np.array([[1.0, 2.0], [0.0, 1.0]]))
    with pytest.raises(NonSymmetricInput):
        evaluate_F(pucci_plus(), np.ones((2, 3)))


def test_inadmissible_matrix_rejected():
    with pytest.raises(ValueError):
        linear(np.diag([0.5, 1.0]), 1.0, 2.0)


def test_make_operator():
    assert make_operator("pucci+", 1, 3).Lam == 3
    assert make_operator("linear", dim=2).is_linear
    with pytest.raises(ValueError):
        make_operator("bogus")
    with pytest.raises(ValueError):
        make_operator("bellman")


@settings(max_examples=200, deadline=None)
@given(H=_sym(2), alpha=st.sampled_from([0.0, 0.5, 3.0]))
def test_positive_homogeneity(H, alpha):
    for op in _all_ops():
        F = evaluate_F(op, H)
        assert abs(evaluate_F(op, alpha * H) - alpha * F) <= 1e-12 * (1 + abs(F)) * max(1, np.abs(H).max())


@settings(max_examples=300, deadline=None)
@given(H1=_sym(2), H2=_sym(2))
def test_ellipticity_sandwich(H1, H2):
    for op in _all_ops():
        assert ellipticity_sandwich_check(op, H1, H2)


def test_sandwich_equal_inputs():
    H = np.array([[1.0, 0.3], [0.3, -2.0]])
    assert ellipticity_sandwich_check(pucci_plus(), H, H)
    assert ellipticity_sandwich_check(laplacian(), H, -H)


@settings(max_examples=200, deadline=None)
@given(H=_sym(2), seed=st.integers(0, 2**16))
def test_pucci_brackets_linear(H, seed):
    A = random_admissible_matrix(np.random.default_rng(seed), 2, LAM, BIG)
    tr = np.trace(A @ H)
    tol = 1e-12 * (1 + np.abs(H).max())
    assert pucci(H, LAM, BIG, -1) - tol <= tr <= pucci(H, LAM, BIG, +1) + tol


@settings(max_examples=100, deadline=None)
@given(H=_sym(2), lam=st.floats(0.1, 5))
def test_pucci_collapse_when_constants_equal(H, lam):
    for op in (pucci_plus(lam, lam), pucci_minus(lam, lam)):
        assert evaluate_F(op, H) == pytest.approx(lam * np.trace(H), abs=1e-11 * (1 + np.abs(H).max()))


@settings(max_examples=100, deadline=None)
@given(H=_sym(2))
def test_policy_reproduces_F(H):
    for op in _all_ops():
        A = policy(op, H)
        assert np.trace(A @ H) == pytest.approx(evaluate_F(op, H), abs=1e-10 * (1 + np.abs(H).max()))
        eig = np.linalg.eigvalsh(A)
        assert eig.min() >= LAM - 1e-12 and eig.max() <= BIG + 1e-12


def test_vectorized_matches_scalar():
    rng = np.random.default_rng(5)
    H = rng.normal(size=(7, 3, 2, 2))
    H = (H + np.swapaxes(H, -1, -2)) / 2
    for op in _all_ops():
        out = evaluate_F(op, H)
        assert out.shape == (7, 3)
        assert out[4, 1] == pytest.approx(evaluate_F(op, H[4, 1]))


# ---------------------------------------------------------------------------
# discrete Hessian


@pytest.mark.parametrize("order", [2, 4])
def test_hessian_exact_on_quadratic_away_from_wrap(order):
    g = make_grid(1.0, 4.0, 32, 9, tangential_order=order)
    M = np.array([[1.5, -0.4], [-0.4, 0.7]])
    u = bulk_from_function(g, lambda x, y: 0.5 * (M[0, 0] * x * x + 2 * M[0, 1] * x * y + M[1, 1] * y * y))
    for node in [(5, 1), (16, 4), (26, 7)]:
        np.testing.assert_allclose(discrete_hessian(u, node), M, atol=1e-9)


def test_hessian_of_constant_is_zero():
    g = make_grid(1.0, 1.0, 16, 9)
    assert np.abs(discrete_hessians(BulkField(g, 2.0))).max() < 1e-9


def test_hessian_boundary_node():
    g = make_grid(1.0, 1.0, 16, 9)
    u = BulkField(g, 0.0)
    with pytest.raises(BoundaryNode):
        discrete_hessian(u, (3, 0))
    with pytest.raises(BoundaryNode):
        discrete_hessian(u, (3, 8))


def _dense_hessian_oracle(vals, hx, hy, i, k, order):
    """Index-arithmetic differences written out by hand."""
    n = vals.shape[0]
    f = lambda a, b: vals[(i + a) % n, k + b]
    if order == 2:
        uxx = (f(1, 0) - 2 * f(0, 0) + f(-1, 0)) / hx**2
    else:
        uxx = (-f(2, 0) + 16 * f(1, 0) - 30 * f(0, 0) + 16 * f(-1, 0) - f(-2, 0)) / (12 * hx**2)
    uyy = (f(0, 1) - 2 * f(0, 0) + f(0, -1)) / hy**2
    uxy = (f(1, 1) - f(1, -1) - f(-1, 1) + f(-1, -1)) / (4 * hx * hy)
    return np.array([[uxx, uxy], [uxy, uyy]])


@pytest.mark.parametrize("order", [2, 4])
def test_hessian_matches_dense_oracle(order):
    g = make_grid(1.3, 2.0, 16, 9, tangential_order=order)
    u = BulkField(g, np.random.default_rng(1).normal(size=g.shape))
    H = discrete_hessians(u)
    for i in (0, 1, 7, 15):
        for k in (1, 4, 7):
            ref = _dense_hessian_oracle(u.values, g.h_t, g.h_n, i, k, order)
            np.testing.assert_allclose(H[i, k - 1], ref, rtol=1e-12, atol=1e-9)
            np.testing.assert_allclose(discrete_hessian(u, (i, k)), ref, rtol=1e-12, atol=1e-9)


def test_hessian_two_dimensional_boundary():
    g = make_grid(1.0, 8.0, 16, 9, d=2)
    M = np.array([[1.0, 0.2, -0.3], [0.2, 2.0, 0.1], [-0.3, 0.1, 0.5]])
    x, y = g.bulk_points()
    X = np.concatenate([x, y[..., None]], axis=-1)
    u = BulkField(g, 0.5 * np.einsum("...i,ij,...j->...", X, M, X))
    np.testing.assert_allclose(discrete_hessian(u, (6, 7, 3)), M, atol=1e-9)
