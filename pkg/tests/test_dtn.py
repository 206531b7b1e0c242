import math

import numpy as np
import pytest

from dtnhomog import BoundaryField, DtNOperator, SolveConfig, apply_dtn, make_grid
from dtnhomog.dtn import (
    assemble_linear_dtn_matrix,
    auxiliary_bound_check,
    auxiliary_bump,
    extremal_pair,
    extremal_sandwich_check,
    extremal_sandwich_defect,
    gcp_probe,
    phi_one,
    random_trig_field,
    touching_bump,
    wrapped_distance,
)
from dtnhomog.exceptions import BumpDoesNotFit, NotConverged, NotLinear
from dtnhomog.grid import boundary_from_function
from dtnhomog.operators import laplacian, linear, pucci_minus, pucci_plus, random_bellman

OPS = [laplacian(), pucci_plus(1, 2), pucci_minus(1, 2), random_bellman(np.random.default_rng(0), 2)]


@pytest.fixture(params=OPS, ids=lambda o: o.kind)
def D(request):
    return DtNOperator(request.param, make_grid(1.0, 2 * math.pi, 32, 17))


@pytest.mark.parametrize("c", [-2.0, 0.0, 3.5])
@pytest.mark.parametrize("r", [0.5, 1.0, 4.0])
def test_constant_data(c, r):
    for op in OPS:
        D = DtNOperator(op, make_grid(r, 2 * math.pi, 32, int(16 * r) + 1))
        np.testing.assert_allclose(apply_dtn(D, BoundaryField(D.grid, c)).values, -c / r, atol=1e-12)


@pytest.mark.parametrize("m", [1, 2, 4])
def test_linear_symbol(m):
    D = DtNOperator(laplacian(), make_grid(1.0, 2 * math.pi, 64, 65))
    phi = boundary_from_function(D.grid, lambda x: np.cos(m * x))
    exact = -m / math.tanh(m) * phi.values
    assert np.max(np.abs(apply_dtn(D, phi).values - exact)) <= 2 * m * D.grid.h**2


def test_nonfinite_data_rejected(D):
    vals = np.zeros(D.grid.boundary_shape)
    vals[3] = np.nan
    with pytest.raises(ValueError):
        apply_dtn(D, BoundaryField(D.grid, vals))


def test_not_converged_propagates():
    g = make_grid(1.0, 2 * math.pi, 32, 17)
    D = DtNOperator(pucci_plus(), g, SolveConfig(max_newton=1))
    with pytest.raises(NotConverged):
        apply_dtn(D, random_trig_field(g, np.random.default_rng(0)))


def test_extremal_pair_shares_constants():
    D = DtNOperator(random_bellman(np.random.default_rng(1), 2, 1.0, 3.0), make_grid(1.0, 1.0, 16, 9))
    Dp, Dm = extremal_pair(D)
    assert (Dp.op.kind, Dm.op.kind) == ("pucci+", "pucci-")
    assert Dp.op.Lam == 3.0 and Dm.op.lam == 1.0 and Dp.grid == D.grid


# ---------------------------------------------------------------------------
# kernel


def test_kernel_structure_identity():
    g = make_grid(1.0, 2 * math.pi, 32, 17)
    est = assemble_linear_dtn_matrix(DtNOperator(laplacian(), g))
    assert est.symmetry_defect <= 1e-8
    assert est.offdiag_min >= -1e-8
    np.testing.assert_allclose(est.row_sums, -1.0, atol=10 * g.h**2)
    assert est.zeroth_order == pytest.approx(-1.0, abs=10 * g.h**2)


def test_kernel_row_sums_anisotropic():
    g = make_grid(2.0, 2 * math.pi, 32, 33)
    op = linear(np.array([[1.6, 0.25], [0.25, 1.3]]), 1.0, 2.0)
    est = assemble_linear_dtn_matrix(DtNOperator(op, g))
    np.testing.assert_allclose(est.row_sums, -0.5, atol=10 * g.h**2)


def test_kernel_is_circulant():
    g = make_grid(1.0, 2 * math.pi, 16, 9)
    K = assemble_linear_dtn_matrix(DtNOperator(laplacian(), g)).matrix
    for k in range(1, 16):
        np.testing.assert_allclose(np.roll(np.roll(K, k, 0), k, 1), K, atol=1e-11)


def test_kernel_requires_linear():
    with pytest.raises(NotLinear):
        assemble_linear_dtn_matrix(DtNOperator(pucci_plus(), make_grid(1.0, 1.0, 16, 9)))


def test_kernel_decay_deep_strip():
    L = 2 * math.pi
    g = make_grid(4 * L, L, 64, 257)
    est = assemble_linear_dtn_matrix(DtNOperator(laplacian(), g))
    assert est.decay_fit_exponent == pytest.approx(-2.0, abs=0.3)


def test_kernel_decay_reference_value():
    # periodized 1/|x|^2 kernel, i.e. (pi/L)^2 / sin^2(pi x / L), fitted on the
    # same window as the estimator; the log-log slope is the frozen oracle
    L = 2 * math.pi
    x = np.arange(1, 33) * L / 64
    sel = (x >= 2 * L / 64) & (x <= L / 4)
    k = 1 / np.sin(np.pi * x / L) ** 2
    slope = np.polyfit(np.log(x[sel]), np.log(k[sel]), 1)[0]
    assert slope == pytest.approx(-1.9039, abs=1e-3)
    est = assemble_linear_dtn_matrix(DtNOperator(laplacian(), make_grid(4 * L, L, 64, 257)))
    assert abs(est.decay_fit_exponent - slope) <= 0.3


# ---------------------------------------------------------------------------
# bumps and probes


def test_wrapped_distance():
    g = make_grid(1.0, 10.0, 10, 5)
    np.testing.assert_allclose(wrapped_distance(g), [0, 1, 2, 3, 4, 5, 4, 3, 2, 1])
    np.testing.assert_allclose(wrapped_distance(g, 9.0)[:3], [1, 2, 3])


def test_phi_one():
    np.testing.assert_allclose(phi_one(np.array([0.0, 1.0, 3.0])), [0.0, 0.5, 0.9])


def test_auxiliary_bump_range():
    g = make_grid(1.0, 8.0, 32, 9)
    assert auxiliary_bump(g, 2.0).values[0] == 0.0
    for R in (0.25, 2.5):
        with pytest.raises(BumpDoesNotFit):
            auxiliary_bump(g, R)


def test_touching_bump_vanishes_at_node():
    g = make_grid(1.0, 2 * math.pi, 32, 9)
    b = touching_bump(g, 7, 0.5, 2.0)
    assert b.values[7] == 0.0 and b.values.min() == 0.0 and b.values.max() <= 2.0


def test_gcp_probe(D):
    rep = gcp_probe(D, 5, seed=1)
    assert rep.passed and rep.trials == 5
    assert rep.max_violation <= rep.tolerance
    with pytest.raises(ValueError):
        gcp_probe(D, 0)


def test_gcp_equal_pair_has_zero_violation(D):
    u = random_trig_field(D.grid, np.random.default_rng(2))
    assert apply_dtn(D, u).values[5] - apply_dtn(D, u).values[5] == 0.0


def test_sandwich(D):
    rng = np.random.default_rng(3)
    Dp, Dm = extremal_pair(D)
    u, v = random_trig_field(D.grid, rng), random_trig_field(D.grid, rng)
    assert extremal_sandwich_check(D, Dp, Dm, u, v)
    assert extremal_sandwich_defect(D, Dp, Dm, u, u) == 0.0


def test_sandwich_collapses_when_constants_equal():
    g = make_grid(1.0, 2 * math.pi, 32, 17)
    D = DtNOperator(linear(np.eye(2) * 1.5, 1.5, 1.5), g)
    Dp, Dm = extremal_pair(D)
    rng = np.random.default_rng(4)
    u, v = random_trig_field(g, rng), random_trig_field(g, rng)
    # all three maps coincide, so both one-sided gaps vanish
    assert abs(extremal_sandwich_defect(D, Dp, Dm, u, v)) <= 1e-10


def test_sandwich_requires_matching_constants():
    g = make_grid(1.0, 2 * math.pi, 16, 9)
    D = DtNOperator(pucci_plus(1, 2), g)
    u = BoundaryField(g, 0.0)
    with pytest.raises(ValueError):
        extremal_sandwich_check(D, D.with_operator(pucci_plus(1, 3)), D.with_operator(pucci_minus(1, 2)), u, u)


def test_auxiliary_bound_upper_norm_decays():
    g = make_grid(1.0, 32.0, 128, 17)
    Dp, Dm = extremal_pair(DtNOperator(pucci_plus(1, 2), g))
    rep = auxiliary_bound_check(Dp, Dm, [1.0, 2.0, 4.0], norm="upper")
    assert rep.passed
    for key in "+-":
        ratios = np.array(rep.ratios[key])
        # m(2R)/m(R) sits well below the 1/R rate
        assert np.all(ratios <= 0.5)


def test_auxiliary_bound_sup_norm_dominated_by_far_field():
    # far from the bump phi_R is ~1, and I(1) = -1/r: the sup norm does not decay
    g = make_grid(1.0, 32.0, 128, 17)
    Dp, Dm = extremal_pair(DtNOperator(pucci_plus(1, 2), g))
    rep = auxiliary_bound_check(Dp, Dm, [1.0, 2.0, 4.0], norm="sup")
    assert not rep.passed
    for key in "+-":
        assert min(rep.m_sup[key]) >= 0.8 / g.depth_r


def test_auxiliary_bound_zero_bump_and_bad_norm():
    g = make_grid(1.0, 32.0, 64, 9)
    Dp, Dm = extremal_pair(DtNOperator(pucci_plus(), g))
    assert apply_dtn(Dp, BoundaryField(g, 0.0)).sup_norm() == 0.0
    with pytest.raises(ValueError):
        auxiliary_bound_check(Dp, Dm, [1.0], norm="l2")


def test_linear_bump_halving_oracle():
    # Fourier oracle for the Laplacian: doubling R roughly halves the upper size
    g = make_grid(1.0, 32.0, 256, 17)
    D = DtNOperator(laplacian(), g)
    m = [max(apply_dtn(D, auxiliary_bump(g, R)).values.max(), 0) for R in (1.0, 2.0, 4.0)]
    ratios = [b / a for a, b in zip(m, m[1:])]
    assert all(0.15 <= q <= 0.5 for q in ratios)
