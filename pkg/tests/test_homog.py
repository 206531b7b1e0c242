import math

import numpy as np
import pytest

from dtnhomog import BoundaryField, SolveConfig, make_grid
from dtnhomog.almostperiodic import TrigPolynomial, two_frequency_datum
from dtnhomog.exceptions import IncompatibleEpsilon
from dtnhomog.grid import boundary_from_function, bulk_from_function
from dtnhomog.homog import (
    EpsilonSweep,
    affine_profile,
    almost_period_transfer,
    check_decay_lemma,
    check_global_bound,
    check_profile,
    check_uniqueness,
    holder_diagnostic_with_gamma,
    holder_exponent_fit,
    holder_quotient,
    interpolate_field,
    pucci_bracket,
    rhs_shift_consistency,
    richardson,
    run_sweep,
    subsweep,
    uniqueness_threshold,
    with_operator,
)
from dtnhomog.operators import laplacian, pucci_minus, pucci_plus, random_bellman

TWO_PI = 2 * math.pi


def _cos_plus(c0):
    return TrigPolynomial.from_terms([(1.0, 1.0)]).plus_constant(c0)


def _sweep(g, op=None, eps=(1 / 2, 1 / 4, 1 / 8), n=16):
    return EpsilonSweep(eps, make_grid(1.0, TWO_PI, n, n // 2 + 1), g, op or laplacian())


@pytest.fixture(scope="module")
def bellman_report():
    s = _sweep(two_frequency_datum(), random_bellman(np.random.default_rng(0), 2))
    return s, run_sweep(s)


# ---------------------------------------------------------------------------
# linear oracle: data c0 + cos(x / eps) on the unit strip gives
# v = -c0 - eps tanh(1 / eps) cos(x / eps)


def test_linear_sweep_mean_and_flags():
    rep = run_sweep(_sweep(_cos_plus(0.3)))
    assert rep.passed
    for rec in rep.per_eps:
        assert rec.mean_v == pytest.approx(-0.3, abs=1e-12)
        assert rec.converged and rec.bound_check
    assert rep.Ibar0 == pytest.approx(-0.3, abs=1e-12)
    assert rep.gbar == pytest.approx(0.3, abs=1e-12)


def test_linear_oscillation_converges_to_oracle():
    errs = []
    for n in (32, 64):
        rep = run_sweep(_sweep(_cos_plus(0.0), eps=(1 / 2, 1 / 4), n=n))
        errs.append(np.array([abs(r.osc_v - 2 * r.eps * math.tanh(1 / r.eps)) for r in rep.per_eps]))
    assert np.all(errs[1] <= 0.01)
    assert np.all(errs[0] / errs[1] >= 3.5)


def test_constant_datum_gives_affine_solution():
    c0 = 0.7
    rep = run_sweep(_sweep(TrigPolynomial.zero().plus_constant(c0)))
    for rec in rep.per_eps:
        assert rec.osc_v <= 1e-12
        np.testing.assert_allclose(rec.v.values, -c0, atol=1e-12)
    assert rep.profile_defect <= 1e-9
    assert check_profile(rep) <= 1e-9
    assert rep.uniqueness_spread <= 1e-12


def test_mean_zero_linear_datum_has_zero_constant():
    rep = run_sweep(_sweep(two_frequency_datum()))
    assert abs(rep.Ibar0) <= 1e-10
    assert rep.gbar == -rep.Ibar0


def test_warm_start_does_not_change_answer(bellman_report):
    s, rep = bellman_report
    cold = run_sweep(s, warm_start=False, check_dtn=False)
    tol = 10 * SolveConfig().residual_tol
    for a, b in zip(rep.per_eps, cold.per_eps):
        assert (a.u - b.u).sup_norm() <= tol


def test_bellman_sweep_flags(bellman_report):
    _, rep = bellman_report
    assert rep.passed
    assert all(r.dtn_defect <= 40 * r.grid.h**2 for r in rep.per_eps)
    assert check_global_bound(rep, two_frequency_datum())
    assert check_decay_lemma(rep)


def test_report_json_schema(bellman_report):
    _, rep = bellman_report
    js = rep.to_json()
    assert set(js) >= {"config_echo", "per_eps", "Ibar0_raw", "Ibar0_extrapolated", "gbar",
                       "uniqueness_spread", "profile_defect", "pass_flags"}
    assert set(js["per_eps"][0]) >= {"eps", "n_t", "n_n", "converged", "osc_v", "mean_v", "sup_v",
                                     "bound_check", "eps_w_decay", "holder_quotient", "iterations"}
    assert js["config_echo"]["L_micro"] == pytest.approx(2 * TWO_PI)


def test_keep_fields_false():
    rep = run_sweep(_sweep(_cos_plus(0.0)), keep_fields=False, check_dtn=False)
    assert rep.finest.u is None and math.isnan(rep.profile_defect)
    assert "dtn_consistency" not in rep.pass_flags
    with pytest.raises(ValueError):
        check_profile(rep)


# ---------------------------------------------------------------------------
# sweep configuration


def test_epsilon_validation():
    base = make_grid(1.0, TWO_PI, 16, 9)
    g = two_frequency_datum()
    with pytest.raises(IncompatibleEpsilon):
        EpsilonSweep((1 / 4, 1 / 6), base, g, laplacian())
    for bad in [(), (1 / 8, 1 / 4), (1.0, 1 / 2), (1 / 4, 1 / 4)]:
        with pytest.raises(ValueError):
            EpsilonSweep(bad, base, g, laplacian())
    with pytest.raises(ValueError):
        EpsilonSweep((1 / 4,), base, TrigPolynomial.zero(2), laplacian())


def test_grid_refinement_rules():
    s = _sweep(two_frequency_datum(), eps=(1 / 4, 1 / 8))
    g = s.grid_for(1 / 8)
    # rounded sqrt(2) -> 1.5; 16 points per wavelength of frequency 1.5 / eps
    assert g.n_tangential == 16 * 12
    assert g.n_normal >= math.ceil(1.0 / g.h_t) + 1
    fixed = EpsilonSweep(s.epsilons, s.base_grid, s.g, s.op, refine_with_eps=False)
    assert fixed.grid_for(1 / 8) == s.base_grid


def test_data_is_rounded_and_periodic():
    s = _sweep(two_frequency_datum(), eps=(1 / 4, 1 / 8))
    g_round, err = s.rounded_g()
    np.testing.assert_allclose(g_round.frequencies[:, 0], [1.0, 1.5])
    assert err > 0
    data = s.data_for(1 / 8)
    x = data.grid.tangential_coords()
    np.testing.assert_allclose(data.values, np.cos(8 * x) + np.cos(12 * x), atol=1e-12)


def test_subsweep_keeps_rounding():
    s = _sweep(two_frequency_datum(), eps=(1 / 4, 1 / 8, 1 / 16))
    sub = subsweep(s, [1 / 16, 1 / 4])
    assert sub.epsilons == (1 / 4, 1 / 16)
    assert sub.rounded_g()[1] == 0.0
    np.testing.assert_allclose(sub.data_for(1 / 16).values, s.data_for(1 / 16).values)
    with pytest.raises(IncompatibleEpsilon):
        subsweep(s, [1 / 4, 1 / 6])


def test_uniqueness_identical_sweeps(bellman_report):
    _, rep = bellman_report
    assert check_uniqueness(rep, rep) == 0.0
    assert uniqueness_threshold(rep, rep, 2.0) >= 100 * rep.h_finest**2


def test_uniqueness_across_subsequences():
    s = _sweep(two_frequency_datum(), pucci_plus(), eps=(1 / 2, 1 / 4, 1 / 8, 1 / 16))
    a = run_sweep(subsweep(s, [1 / 2, 1 / 8]), check_dtn=False)
    b = run_sweep(subsweep(s, [1 / 4, 1 / 16]), check_dtn=False)
    assert check_uniqueness(a, b) <= uniqueness_threshold(a, b, 2.0)


def test_decay_check_needs_three():
    rep = run_sweep(_sweep(_cos_plus(0.0), eps=(1 / 2, 1 / 4)), check_dtn=False)
    with pytest.raises(ValueError):
        check_decay_lemma(rep)


def test_decay_check_rejects_growth(bellman_report):
    _, rep = bellman_report
    saved = [r.osc_v for r in rep.per_eps]
    try:
        rep.per_eps[-1].osc_v = 10 * saved[0]
        assert not check_decay_lemma(rep)
    finally:
        for r, o in zip(rep.per_eps, saved):
            r.osc_v = o


# ---------------------------------------------------------------------------
# helpers


def test_richardson_exact_on_affine():
    m = lambda e: 0.4 + 3.0 * e
    assert richardson(1 / 32, m(1 / 32), 1 / 16, m(1 / 16)) == pytest.approx(0.4, abs=1e-14)


def test_affine_profile():
    g = make_grid(2.0, 1.0, 8, 5)
    p = affine_profile(g, 3.0)
    exact = bulk_from_function(g, lambda x, y: 3.0 * (1 - y / 2.0) + 0 * x)
    assert (p - exact).sup_norm() <= 1e-15


def test_interpolate_field_exact_on_bilinear():
    a = make_grid(1.0, TWO_PI, 16, 9)
    b = make_grid(1.0, TWO_PI, 32, 17)
    f = lambda x, y: 2.0 + 3.0 * y + 0 * x
    out = interpolate_field(bulk_from_function(a, f), b)
    np.testing.assert_allclose(out, bulk_from_function(b, f).values, atol=1e-13)
    with pytest.raises(ValueError):
        interpolate_field(bulk_from_function(a, f), make_grid(2.0, TWO_PI, 16, 9))


def test_holder_constant_is_zero():
    g = make_grid(1.0, TWO_PI, 64, 5)
    v = BoundaryField(g, 1.5)
    assert holder_quotient(v, 0.5) == 0.0
    q, gamma = holder_diagnostic_with_gamma(v)
    assert q == 0.0 and gamma == 1.0


@pytest.mark.parametrize("k", [1, 3])
def test_holder_quotient_matches_direct_maximization(k):
    g = make_grid(1.0, TWO_PI, 64, 5)
    v = boundary_from_function(g, lambda x: np.cos(k * x))
    x = g.tangential_coords()
    best = 0.0
    for i in range(64):
        for j in range(64):
            if i != j:
                d = min(abs(x[i] - x[j]), TWO_PI - abs(x[i] - x[j]))
                best = max(best, abs(v.values[i] - v.values[j]) / d**0.5)
    assert holder_quotient(v, 0.5) == pytest.approx(best, rel=1e-12)


def test_holder_fit_smooth_and_rough():
    g = make_grid(1.0, TWO_PI, 256, 5)
    x = g.tangential_coords()
    smooth = boundary_from_function(g, np.cos)
    assert holder_exponent_fit(smooth) == pytest.approx(1.0, abs=0.05)
    d = np.minimum(x, TWO_PI - x)
    rough = BoundaryField(g, np.sqrt(d))
    assert holder_exponent_fit(rough) == pytest.approx(0.5, abs=0.1)
    assert holder_diagnostic_with_gamma(rough)[1] == 0.5
    with pytest.raises(ValueError):
        holder_diagnostic_with_gamma(BoundaryField(make_grid(1.0, 1.0, 16, 5), 0.0))


# ---------------------------------------------------------------------------
# derived experiments


def test_pucci_bracket(bellman_report):
    s, rep = bellman_report
    br = pucci_bracket(s, report_F=rep)
    assert br.passed
    assert br.Ibar0_minus < br.Ibar0_F < br.Ibar0_plus


def test_pucci_bracket_reuses_report_for_extremal_operator():
    s = _sweep(two_frequency_datum(), pucci_minus(), eps=(1 / 2, 1 / 4))
    rep = run_sweep(s, check_dtn=False)
    br = pucci_bracket(s, report_F=rep)
    assert br.Ibar0_minus == br.Ibar0_F and br.passed


@pytest.mark.parametrize("op", [laplacian(), pucci_plus()], ids=["linear", "pucci+"])
def test_rhs_shift_consistency(op):
    res = rhs_shift_consistency(_sweep(two_frequency_datum(), op, eps=(1 / 2, 1 / 4)), 0.0, 0.5)
    assert res.passed
    # adding c to the datum moves Ibar0 by -c
    assert res.Ibar0_1 - res.Ibar0_2 == pytest.approx(0.5, abs=1e-10)


def test_with_operator_keeps_everything_else():
    s = _sweep(two_frequency_datum())
    t = with_operator(s, pucci_plus())
    assert (t.epsilons, t.base_grid, t.g) == (s.epsilons, s.base_grid, s.g)
    assert t.op.kind == "pucci+"


def test_almost_period_transfer_on_periodic_datum():
    s = _sweep(two_frequency_datum(), pucci_plus(), eps=(1 / 4, 1 / 8))
    res = almost_period_transfer(s, 1 / 8, 0.5)
    assert res.passed
    assert len(res.taus) >= 1
    # the rounded datum has period 4 pi, so shifts by 4 pi are exact
    exact = np.isclose(res.taus % (2 * TWO_PI), 0.0) & (res.taus > 0)
    assert np.all(res.shift_defects[exact] <= 1e-10)
    assert res.max_defect <= res.tolerance
