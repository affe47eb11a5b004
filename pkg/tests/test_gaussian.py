import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from divgauge.errors import DomainError, FactorizationError
from divgauge.families import Renyi, alpha, chi_squared, hellinger, kl
from divgauge.gaussian import GaussianSpec, kl_closed_form, log_chernoff, oracle_divergence, oracle_divergence_mc

# Reference values from scipy.integrate.quad applied directly to p(x) f(q(x)/p(x)).
PAIRS = {
    "narrow": ((0.0, 0.5), (0.0, 1.0)),
    "shifted": ((1.0, 1.0), (0.0, 1.0)),
    "mixed": ((0.3, 1.5), (-0.2, 0.8)),
    "wide": ((0.0, 2.0), (0.0, 1.0)),
    "far": ((-1.0, 0.7), (0.5, 1.2)),
}
REFERENCE = {
    "narrow": {"kl": 0.096573590280, "hel": 0.116065826341, "a.25": 0.131307903512, "a1.5": 0.084878905852,
               "chi2": 0.077350269190},
    "shifted": {"kl": 0.5, "hel": 0.470012389662, "a.25": 0.477278072640, "a1.5": 0.606655219491,
                "chi2": 0.859140914230},
    "mixed": {"kl": 0.279445670289, "hel": 0.200688500071, "a.25": 0.179514318002, "a1.5": 0.537801881405},
    "wide": {"kl": 0.153426409720, "hel": 0.116065826341, "a.25": 0.104967692254, "a1.5": 0.252276153337},
    "far": {"kl": 0.998664917033, "hel": 1.077907322567, "a.25": 1.263843464134, "a1.5": 1.150260778136,
            "chi2": 1.566232983022},
}
FAMS = {"kl": kl(), "hel": hellinger(), "a.25": alpha(0.25), "a1.5": alpha(1.5), "chi2": chi_squared()}


def _spec(mv):
    return GaussianSpec(mv[0], mv[1])


@pytest.mark.parametrize("pair", list(REFERENCE))
def test_oracle_matches_reference(pair):
    q, p = PAIRS[pair]
    for key, ref in REFERENCE[pair].items():
        assert oracle_divergence(FAMS[key], _spec(q), _spec(p)) == pytest.approx(ref, abs=1e-9)


def test_closed_form_agrees_with_quadrature():
    for q, p in PAIRS.values():
        for fam in (kl(), hellinger(), alpha(0.25), alpha(1.5), Renyi(0.5)):
            a = oracle_divergence(fam, _spec(q), _spec(p), "quadrature")
            b = oracle_divergence(fam, _spec(q), _spec(p), "closed")
            assert a == pytest.approx(b, rel=1e-8, abs=1e-12)


def test_hellinger_bhattacharyya_closed_form():
    # BC of N(0, 1/2) and N(0, 1) is sqrt(2 s1 s2 / (s1^2 + s2^2))
    s1, s2 = math.sqrt(0.5), 1.0
    bc = math.sqrt(2 * s1 * s2 / (s1**2 + s2**2))
    val = oracle_divergence(hellinger(), GaussianSpec(0.0, 0.5), GaussianSpec(0.0, 1.0))
    assert val == pytest.approx(4 * (1 - bc), rel=1e-12)


def test_chi2_infinite_when_tails_too_heavy():
    assert math.isinf(oracle_divergence(chi_squared(), GaussianSpec(0.0, 2.0), GaussianSpec(0.0, 1.0)))
    assert math.isinf(oracle_divergence(alpha(3.0), GaussianSpec(0.0, 1.6), GaussianSpec(0.0, 1.0)))


def test_renyi_value():
    # R_a = log int q^a p^(1-a) / (a (a-1)) and int q^a p^(1-a) = 1 - a(1-a) D_a / 1 for the alpha family
    Q, P = GaussianSpec(0.0, 0.5), GaussianSpec(0.0, 1.0)
    d = oracle_divergence(hellinger(), Q, P)
    chern = 1.0 - d / 4.0
    assert oracle_divergence(Renyi(0.5), Q, P) == pytest.approx(-4.0 * math.log(chern), rel=1e-10)


def test_diagonal_coordinates_combine():
    Q = GaussianSpec([0.0, 1.0], [0.5, 1.0])
    P = GaussianSpec([0.0, 0.0], [1.0, 1.0])
    assert oracle_divergence(kl(), Q, P) == pytest.approx(0.096573590280 + 0.5, abs=1e-9)
    bc = (1 - 0.116065826341 / 4) * (1 - 0.470012389662 / 4)
    assert oracle_divergence(hellinger(), Q, P) == pytest.approx(4 * (1 - bc), abs=1e-9)


def test_full_covariance_closed_form():
    rho = 0.5
    Q = GaussianSpec(np.zeros(2), np.array([[1.0, rho], [rho, 1.0]]))
    P = GaussianSpec(np.zeros(2), 1.0)
    assert oracle_divergence(kl(), Q, P) == pytest.approx(-0.5 * math.log(1 - rho**2), rel=1e-12)
    # Hellinger MI of a correlated pair: BC = (1 - rho^2)^(1/4) / sqrt(1 - rho^2 / 4)
    bc = (1 - rho**2) ** 0.25 / math.sqrt(1 - rho**2 / 4)
    assert oracle_divergence(hellinger(), Q, P) == pytest.approx(4 * (1 - bc), rel=1e-12)
    assert kl_closed_form(Q, P) == pytest.approx(-0.5 * math.log(1 - rho**2), rel=1e-12)


def test_log_chernoff_not_positive_definite():
    assert log_chernoff(3.0, GaussianSpec(0.0, 2.0), GaussianSpec(0.0, 1.0)) == math.inf


def test_spec_validation():
    with pytest.raises(FactorizationError):
        GaussianSpec(np.zeros(2), np.array([[1.0, 2.0], [2.0, 1.0]]))
    with pytest.raises(FactorizationError):
        GaussianSpec(0.0, 0.0)
    s = GaussianSpec(0.0, 1e-12)
    x = s.sample(1000, np.random.default_rng(0))
    assert 0 < x.std() < 1e-5


def test_dimension_mismatch():
    with pytest.raises(DomainError):
        oracle_divergence(kl(), GaussianSpec([0.0, 0.0], 1.0), GaussianSpec(0.0, 1.0))


def test_mc_oracle_within_error(rng):
    Q, P = GaussianSpec(0.0, 0.5), GaussianSpec(0.0, 1.0)
    val, se = oracle_divergence_mc(hellinger(), Q, P, 10**6, rng)
    assert abs(val - 0.116065826341) < 4 * se
    with pytest.raises(DomainError):
        oracle_divergence_mc(hellinger(), Q, P, 1000, rng)


def test_logpdf_matches_scipy():
    from scipy import stats

    cov = np.array([[1.0, 0.3], [0.3, 2.0]])
    s = GaussianSpec([0.5, -1.0], cov)
    x = np.array([[0.0, 0.0], [1.0, 2.0]])
    np.testing.assert_allclose(s.logpdf(x), stats.multivariate_normal([0.5, -1.0], cov).logpdf(x), rtol=1e-12)


@settings(max_examples=30, deadline=None)
@given(m=st.floats(-2, 2), v=st.floats(0.3, 3.0))
def test_kl_quadrature_equals_closed_form(m, v):
    Q, P = GaussianSpec(m, v), GaussianSpec(0.0, 1.0)
    ref = 0.5 * (v + m * m - 1.0 - math.log(v))
    assert oracle_divergence(kl(), Q, P) == pytest.approx(ref, rel=1e-8, abs=1e-11)


@settings(max_examples=30, deadline=None)
@given(m=st.floats(-2, 2), v=st.floats(0.3, 3.0))
def test_hellinger_bounded_and_nonnegative(m, v):
    d = oracle_divergence(hellinger(), GaussianSpec(m, v), GaussianSpec(0.0, 1.0))
    assert -1e-12 <= d < 4.0
