import itertools
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from uclab.bounds import (TEMPLATES, ComplexityTemplate, erm_gap_bound, expected_grad_diff_bound,
                          induced_gradient_complexity, ncc_population_complexity, ncc_sample_plan,
                          ncsc_population_complexity, prox_reg_bound, sample_size_ncc,
                          sample_size_ncsc, stability_y_bound, subgaussian_variance_proxy_ncsc)
from uclab.errors import ArgumentError, UnsupportedSettingError

EPS_GRID = (0.2, 0.1, 0.05)


def pairwise_slopes(f, eps=EPS_GRID):
    vals = [f(e) for e in eps]
    return [math.log(vals[i + 1] / vals[i]) / math.log(eps[i + 1] / eps[i])
            for i in range(len(eps) - 1)]


# --- formula examples ---------------------------------------------------------------


def test_stability_examples():
    assert stability_y_bound(1.0, 1.0, 10) == pytest.approx(0.4)
    assert stability_y_bound(1.0, 2.0, 10) == pytest.approx(0.2)
    assert stability_y_bound(1.0, 1.0, 1000) == pytest.approx(0.004)


def test_erm_gap_examples():
    assert erm_gap_bound(1.0, 1.0, 4) == pytest.approx(1.0)
    assert erm_gap_bound(2.0, 1.0, 16) == pytest.approx(1.0)
    assert erm_gap_bound(2.0, 1.0, 7) == pytest.approx(4 * erm_gap_bound(1.0, 1.0, 7))


def test_expected_gradient_difference_examples():
    assert expected_grad_diff_bound(1, 1, 1, 100) == pytest.approx(0.1 + math.sqrt(0.08))
    assert expected_grad_diff_bound(1, 1, 1, 400) == pytest.approx(
        expected_grad_diff_bound(1, 1, 1, 100) / 2)


def test_prox_regularization_examples():
    assert prox_reg_bound(0.01, 1.0, 0.5, 1.0) == pytest.approx(math.sqrt(0.005 / 0.495))
    assert prox_reg_bound(0.0, 1.0, 0.5, 1.0) == 0.0
    with pytest.raises(ArgumentError, match="lambda"):
        prox_reg_bound(0.01, 1.0, 1.0 / 1.01, 1.0)
    with pytest.raises(ArgumentError):
        prox_reg_bound(0.01, 1.0, 0.0, 1.0)
    with pytest.raises(ArgumentError):
        prox_reg_bound(-0.1, 1.0, 0.5, 1.0)
    # just inside the guard the bound is finite but large
    assert prox_reg_bound(0.01, 1.0, (1 - 1e-6) / 1.01, 1.0) > 50


def test_variance_proxy_examples():
    assert subgaussian_variance_proxy_ncsc(1, 1, 1, 9) == pytest.approx(1.0)
    assert subgaussian_variance_proxy_ncsc(1, 1, 1, 36) == pytest.approx(0.25)


@pytest.mark.parametrize("fn, args", [
    (stability_y_bound, (1.0, 0.0, 10)),
    (erm_gap_bound, (1.0, 0.0, 10)),
    (expected_grad_diff_bound, (1.0, 1.0, 0.0, 10)),
    (subgaussian_variance_proxy_ncsc, (1.0, 1.0, 0.0, 10)),
])
def test_strong_concavity_required(fn, args):
    with pytest.raises(UnsupportedSettingError):
        fn(*args)


def test_sample_size_rejected_below_one():
    with pytest.raises(ArgumentError):
        stability_y_bound(1.0, 1.0, 0)


# --- sample sizes -------------------------------------------------------------------------


def test_ncsc_sample_size_worked_example():
    # ceil(18 ln 8) = ceil(37.43)
    assert sample_size_ncsc(1, 1.0, 1.0, 1.0, 1.0) == 38 == math.ceil(18 * math.log(8))


def test_ncsc_sample_size_scalings():
    base = sample_size_ncsc(1, 0.1, 1, 1, 1)
    assert sample_size_ncsc(2, 0.1, 1, 1, 1) in (2 * base - 1, 2 * base)
    ratio = sample_size_ncsc(1, 0.05, 1, 1, 1) / base
    assert 4.0 < ratio < 4.0 * math.log(160) / math.log(80) + 0.01


def test_ncsc_sample_size_errors():
    with pytest.raises(ArgumentError, match="too large"):
        sample_size_ncsc(1, 8.0, 1.0, 1.0, 1.0)
    with pytest.raises(ArgumentError):
        sample_size_ncsc(1, 0.0, 1.0, 1.0, 1.0)
    with pytest.raises(ArgumentError):
        sample_size_ncsc(0, 0.1, 1.0, 1.0, 1.0)
    with pytest.raises(UnsupportedSettingError):
        sample_size_ncsc(1, 0.1, 1.0, 0.0, 1.0)


def independent_ncc_size(d, eps, L, G, D_X, D_Y):
    """Smallest n with both middle budget terms <= eps/8, by bisection on the terms."""
    nu = eps**2 / (64 * L * D_Y)
    per_axis = math.ceil(2 * math.sqrt(D_X) * math.sqrt(d) / (2 * eps / (32 * L)))
    log_q = d * math.log(per_axis)
    lx, ly = G + 4 * L * math.sqrt(D_X), G + nu * math.sqrt(D_Y)

    def ok(n):
        net = 4 * L * math.sqrt(log_q / (2 * n) * (lx**2 / L**2 + ly**2 / (nu * L)))
        exp = 2 * L * math.sqrt(4 * math.sqrt(2) / (L * n) * (lx**2 / L + ly**2 / nu))
        # one ulp of slack: the closed form is an exact ceiling of the same inequality
        return max(net, exp) <= eps / 8 * (1 + 1e-12)

    lo, hi = 1, 2
    while not ok(hi):
        lo, hi = hi, hi * 2
    while hi - lo > 1:
        mid = (lo + hi) // 2
        lo, hi = (lo, mid) if ok(mid) else (mid, hi)
    return hi


@pytest.mark.parametrize("d, eps, expected", [
    (1, 0.5, 2410456),
    (2, 0.5, 5228917),
    (4, 0.5, 11248792),
    (1, 0.1, 1898137597),
])
def test_ncc_sample_size_frozen(d, eps, expected):
    assert independent_ncc_size(d, eps, 1.0, 1.0, 1.0, 1.0) == expected
    assert sample_size_ncc(d, eps, 1.0, 1.0, 1.0, 1.0) == expected


def test_ncc_plan_parameters_and_budget():
    plan = ncc_sample_plan(1, 0.5, 1.0, 1.0, 1.0, 1.0)
    assert plan.nu == pytest.approx(0.5**2 / 64)
    assert plan.lam == 0.5 and plan.upsilon == pytest.approx(0.5 / 32)
    assert plan.Q == 64
    # the regularization term is exactly half of eps and the total fits the budget
    assert plan.budget["regularization"] == pytest.approx(0.25)
    assert 2 * math.sqrt(4 * 1.0 * plan.nu * 1.0) <= 0.5 / 2 + 1e-15
    assert plan.budget["net_concentration"] <= 0.5 / 8 * (1 + 1e-12)
    assert plan.budget["expectation"] <= 0.5 / 8 * (1 + 1e-12)
    assert sum(plan.budget.values()) <= 0.5 * (1 + 1e-12)


def test_ncc_sample_size_scalings():
    n1 = sample_size_ncc(1, 0.2, 1, 1, 1, 1)
    n_half = sample_size_ncc(1, 0.1, 1, 1, 1, 1)
    assert 16 <= n_half / n1 <= 16 * 1.3
    n2 = sample_size_ncc(2, 0.2, 1, 1, 1, 1)
    assert 1.8 <= n2 / n1 <= 2.4


def test_ncc_sample_size_errors():
    with pytest.raises(ArgumentError):
        sample_size_ncc(1, -0.1, 1, 1, 1, 1)
    with pytest.raises(ArgumentError):
        sample_size_ncc(1, 0.1, 1, 1, 0.0, 1)


# --- monotonicity -----------------------------------------------------------------------


@given(st.floats(0.1, 10), st.floats(0.1, 10), st.floats(0.1, 10), st.integers(1, 10**6))
def test_bounds_monotone(G, L, mu, n):
    for fn in (lambda G, L, mu, n: stability_y_bound(G, mu, n),
               lambda G, L, mu, n: erm_gap_bound(G, mu, n),
               expected_grad_diff_bound,
               subgaussian_variance_proxy_ncsc):
        v = fn(G, L, mu, n)
        assert math.isfinite(v) and v > 0
        assert fn(G, L, mu, n + 1) <= v
        assert fn(G * 1.5, L, mu, n) >= v
        assert fn(G, L * 1.5, mu, n) >= v
        assert fn(G, L, mu * 1.5, n) <= v
    assert expected_grad_diff_bound(G, L, mu, n) >= L * math.sqrt(8 * G**2 / (mu**2 * n))


@given(st.floats(1e-4, 1.0), st.floats(0.1, 10), st.floats(0.1, 10), st.floats(0.1, 10))
def test_sample_sizes_monotone(eps, L, G, D):
    ncsc = lambda d, e, L_, G_: sample_size_ncsc(d, e, L_, 1.0, G_)
    if 4 * L * (1 + L) / eps > 1.05:
        assert ncsc(1, eps / 2, L, G) >= ncsc(1, eps, L, G)
        assert ncsc(2, eps, L, G) >= ncsc(1, eps, L, G)
        assert ncsc(1, eps, L, G * 2) >= ncsc(1, eps, L, G)
    eps_c = max(eps, 0.05)
    base = sample_size_ncc(1, eps_c, L, G, D, D)
    assert sample_size_ncc(1, eps_c / 2, L, G, D, D) >= base
    assert sample_size_ncc(2, eps_c, L, G, D, D) >= base


def test_ncsc_sample_size_on_parameter_grid():
    eps_vals, d_vals, kappa_vals = (0.5, 0.2, 0.1), (1, 2, 4), (1.0, 4.0, 16.0)
    for eps, d, kappa in itertools.product(eps_vals, d_vals, kappa_vals):
        n = sample_size_ncsc(d, eps, kappa, 1.0, 1.0)
        if eps != eps_vals[-1]:
            assert sample_size_ncsc(d, eps / 2, kappa, 1.0, 1.0) > n
        if d != d_vals[-1]:
            assert sample_size_ncsc(2 * d, eps, kappa, 1.0, 1.0) > n
        if kappa != kappa_vals[-1]:
            assert sample_size_ncsc(d, eps, 4 * kappa, 1.0, 1.0) > n


# --- complexity ----------------------------------------------------------------------------


def test_template_arithmetic():
    assert induced_gradient_complexity(10**4, 0.1, "sqrt_n") == pytest.approx(1e4)
    custom = [(2.0, 1.0, 0.0, 0.0)]
    assert induced_gradient_complexity(5, 0.3, custom, multiplier=3) == pytest.approx(30.0)
    t = TEMPLATES["catalyst_svrg_ncc"]
    assert t.evaluate(16.0, 0.5) == pytest.approx(16**0.75 * 8 + 16 * 4)
    assert isinstance(t, ComplexityTemplate)
    with pytest.raises(ArgumentError):
        induced_gradient_complexity(0, 0.1, "sqrt_n")


def test_ncsc_chain_uses_four_times_n_star_at_half_eps():
    n_star = sample_size_ncsc(1, 0.1, 10.0, 1.0, 1.0)
    expected = math.sqrt(4 * n_star) * 10.0**2 / 0.05**2
    assert ncsc_population_complexity(1, 0.1, 10.0, 1.0, 1.0) == pytest.approx(expected)


def test_ncsc_chain_epsilon_exponent():
    slopes = pairwise_slopes(lambda e: ncsc_population_complexity(1, e, 10.0, 1.0, 1.0))
    assert all(abs(s + 3) <= 0.1 for s in slopes), slopes


def test_ncc_chain_epsilon_exponent():
    slopes = pairwise_slopes(lambda e: ncc_population_complexity(1, e, 10.0, 1.0, 1.0, 1.0))
    assert all(abs(s + 6) <= 0.2 for s in slopes), slopes


# --- Monte Carlo check of the expectation bound --------------------------------------------


def test_expected_gradient_difference_bound_holds_empirically(ncsc):
    x = np.array([0.3, -0.4])
    pop_grad = ncsc.population().primal_grad(x)
    n = 64
    diffs = [np.linalg.norm(ncsc.empirical(ncsc.draw(1000 + r, n)).primal_grad(x) - pop_grad)
             for r in range(200)]
    c = ncsc.constants
    assert np.mean(diffs) <= expected_grad_diff_bound(c.G, c.L, c.mu, n)
