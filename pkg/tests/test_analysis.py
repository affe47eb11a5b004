import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from divgauge.analysis import (
    affine_gain_matrix_form,
    alpha_scale_asymptotic_variance,
    alpha_variance_at_optimizer,
    curvature_functional,
    data_processing_check,
    delta_method_se,
    fdiv_hessian_closed_forms,
    gateaux_second_derivative,
    hellinger_relative_variance,
    kl_hessian_closed_forms,
    lt_variance,
    numeric_curvatures,
    polynomial_direction,
    product_property_check,
    quadrature_batch,
    transformed_lt_value,
)
from divgauge.errors import ConvergenceError, DegenerateError, DomainError
from divgauge.families import alpha, exact_optimizer, hellinger, kl
from divgauge.gaussian import GaussianSpec, log_density_ratio, oracle_divergence
from divgauge.objectives import BatchEval

Q = GaussianSpec(0.0, 0.5)
P = GaussianSpec(0.0, 1.0)
X = polynomial_direction([0, 1], "x")
X2 = polynomial_direction([0, 0, 1], "x^2")
ONE_PLUS_X = polynomial_direction([1, 1], "1+x")

# Tilted-measure moments integrated independently with scipy.integrate.quad.
HELLINGER_REFERENCE = {
    "x": dict(id=-0.4254636717555992, shift=-0.4254636717555992, scale=-0.4254636717555992,
              affine=-0.4254636717555992),
    "x^2": dict(id=-0.510556406106719, shift=-0.3403709374044794, scale=-0.2530855131183292,
                affine=-0.01604068898355696),
    "1+x": dict(id=-1.4891228511445973, shift=-0.425463671755599, scale=-0.45923927919103796,
                affine=-0.425463671755599),
}


def test_kl_closed_forms_frozen():
    for psi, ref in ((X, dict(id=-0.5, shift=-0.5, scale=-0.5, affine=-0.5)),
                     (X2, dict(id=-0.75, shift=-0.5, affine=0.0))):
        cf = kl_hessian_closed_forms(Q, P, psi).closed_form
        for k, v in ref.items():
            assert cf[k] == pytest.approx(v, abs=1e-12)


def test_kl_is_general_form_with_unit_weight():
    for psi in (X, X2, ONE_PLUS_X):
        a = kl_hessian_closed_forms(Q, P, psi).closed_form
        b = fdiv_hessian_closed_forms(kl(), Q, P, psi).closed_form
        for k in a:
            assert a[k] == pytest.approx(b[k], abs=1e-10)


@pytest.mark.parametrize("psi", [X, X2, ONE_PLUS_X], ids=lambda p: p.__name__)
def test_hellinger_closed_forms_frozen(psi):
    cf = fdiv_hessian_closed_forms(hellinger(), Q, P, psi).closed_form
    for k, v in HELLINGER_REFERENCE[psi.__name__].items():
        assert cf[k] == pytest.approx(v, rel=1e-9, abs=1e-12)


@pytest.mark.parametrize("psi", [X, X2, ONE_PLUS_X], ids=lambda p: p.__name__)
def test_numeric_curvature_matches_closed_form(psi):
    num = numeric_curvatures(hellinger(), Q, P, psi)
    for k, v in HELLINGER_REFERENCE[psi.__name__].items():
        assert abs(num[k] - v) <= 1e-3 * max(abs(v), 1e-6)


def test_matrix_form_equals_affine():
    for fam in (kl(), hellinger(), alpha(2.0), alpha(0.25)):
        for psi in (X, X2, ONE_PLUS_X):
            cf = fdiv_hessian_closed_forms(fam, Q, P, psi).closed_form["affine"]
            assert affine_gain_matrix_form(fam, Q, P, psi) == pytest.approx(cf, abs=1e-10)


@settings(max_examples=30, deadline=None)
@given(c=st.lists(st.floats(-2, 2), min_size=3, max_size=3), a=st.sampled_from([0.25, 0.5, 0.75, 1.5, 2.0]),
       s=st.floats(0.5, 0.9), m=st.floats(-0.5, 0.5))
def test_curvature_orderings(c, a, s, m):
    cf = fdiv_hessian_closed_forms(alpha(a), GaussianSpec(m, s), P, polynomial_direction(c)).closed_form
    tol = 1e-9 * (1 + max(abs(v) for v in cf.values()))
    assert cf["id"] <= cf["shift"] + tol and cf["shift"] <= cf["affine"] + tol
    assert cf["id"] <= cf["scale"] + tol and cf["scale"] <= cf["affine"] + tol
    assert cf["affine"] <= tol


def test_transformed_lt_recovers_divergence_at_optimizer():
    fam = hellinger()
    lr = log_density_ratio(Q, P)
    batch = quadrature_batch(exact_optimizer(fam, lambda x: np.exp(lr(x))), Q, P)
    D = oracle_divergence(fam, Q, P)
    for t in ("id", "shift", "scale", "affine"):
        val, state = transformed_lt_value(fam, batch, t)
        assert val == pytest.approx(D, abs=1e-10)
        assert state.eta == pytest.approx(1.0, abs=1e-6) and state.nu == pytest.approx(0.0, abs=1e-6)
    with pytest.raises(DomainError):
        transformed_lt_value(fam, batch, "rotate")


def test_gateaux_guards():
    J = curvature_functional(kl(), Q, P, X2, "id")
    with pytest.raises(DomainError):
        gateaux_second_derivative(J, eps=0.5)
    assert gateaux_second_derivative(lambda e: 3 * e * e) == pytest.approx(6.0)
    with pytest.raises(ConvergenceError):
        gateaux_second_derivative(lambda e: abs(e) ** 1.5, eps=0.1)


def test_affine_undefined_when_q_equals_p():
    with pytest.raises(DomainError):
        fdiv_hessian_closed_forms(hellinger(), P, P, X)


def test_relative_variance_formula():
    assert hellinger_relative_variance(1.0) == pytest.approx(3.5)
    with pytest.raises(DomainError):
        hellinger_relative_variance(0.0)
    with pytest.raises(DomainError):
        hellinger_relative_variance(8.0)


def test_optimizer_variance_matches_relative_formula():
    # At the optimizer of the scaled Hellinger objective n Var / D^2 equals (8 - D) / (2 D).
    for q in (GaussianSpec(1.0, 1.0), GaussianSpec(0.0, 0.5), GaussianSpec(0.5, 2.0)):
        D = oracle_divergence(hellinger(), q, P)
        assert alpha_variance_at_optimizer(0.5, q, P) / D**2 == pytest.approx(hellinger_relative_variance(D),
                                                                               rel=1e-9)


def test_scale_formula_at_optimizer_matches_direct(rng):
    fam = hellinger()
    q = GaussianSpec(1.0, 1.0)
    lr = log_density_ratio(q, P)
    phi = exact_optimizer(fam, lambda x: np.exp(lr(x)), "alpha_scale")
    rep = alpha_scale_asymptotic_variance(0.5, phi, q, P, repeats=0)
    assert rep.formula_value == pytest.approx(alpha_variance_at_optimizer(0.5, q, P), rel=1e-9)
    assert math.isnan(rep.mc_value)


def test_lt_variance_monte_carlo(rng):
    fam = kl()
    phi = lambda x: 0.3 * x[:, 0]  # noqa: E731
    rep = lt_variance(fam, phi, Q, P, n=2000, repeats=400, rng=rng)
    # Var_Q[0.3x] + Var_P[exp(0.3x - 1)]
    exact = 0.09 * 0.5 + math.exp(-2) * (math.exp(0.18) - math.exp(0.09))
    assert rep.formula_value == pytest.approx(exact, rel=1e-10)
    assert abs(rep.mc_value - exact) < 4 * rep.mc_se


def test_delta_method_se_matches_spread(rng):
    fam = hellinger()
    phi = lambda x: np.exp(-0.2 * x[:, 0] ** 2)  # noqa: E731
    from divgauge.objectives import alpha_scale_objective

    vals, ses = [], []
    for _ in range(200):
        b = BatchEval(phi(Q.sample(500, rng)), phi(P.sample(500, rng)))
        vals.append(alpha_scale_objective(fam, b).value)
        ses.append(delta_method_se("alpha_scale", fam, b))
    assert np.mean(ses) == pytest.approx(np.std(vals, ddof=1), rel=0.15)


def test_consistency_checks():
    assert data_processing_check(0.9, 1.0) == pytest.approx(0.9)
    # k = a(a-1) = -1/4: [(1 - 0.3/4)^2 - 1] / (-1/4) = 0.5775
    assert product_property_check(0.5, [0.3, 0.3], 0.5775) == pytest.approx(1.0, rel=1e-12)
    with pytest.raises(DegenerateError):
        product_property_check(0.5, [0.3, -0.1], 0.6)
    with pytest.raises(DegenerateError):
        data_processing_check(0.5, 1e-6)
