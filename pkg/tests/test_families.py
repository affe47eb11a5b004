import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from divgauge.errors import DomainError
from divgauge.families import (
    DivergenceFamily,
    Renyi,
    alpha,
    chi_squared,
    exact_optimizer,
    family_from_name,
    hellinger,
    kl,
)

FAMILIES = [kl(), hellinger(), alpha(0.25), alpha(1.5), alpha(3.0), chi_squared()]


def _interior(fam, n=25):
    lo, hi = fam.domain_fstar
    if fam.is_alpha and fam.alpha < 1:
        return -np.geomspace(0.2, 5.0, n)
    if fam.is_alpha:
        return np.geomspace(0.2, 5.0, n)
    return np.linspace(-3, 3, n)


@pytest.mark.parametrize("fam", FAMILIES, ids=lambda f: f.name)
def test_conjugate_derivatives_match_finite_differences(fam):
    y = _interior(fam)
    h = 1e-6
    np.testing.assert_allclose(fam.f_star_d1(y), (fam.f_star(y + h) - fam.f_star(y - h)) / (2 * h), rtol=1e-6)
    np.testing.assert_allclose(fam.f_star_d2(y), (fam.f_star_d1(y + h) - fam.f_star_d1(y - h)) / (2 * h), rtol=1e-6)
    np.testing.assert_allclose(fam.f_star_d3(y), (fam.f_star_d2(y + h) - fam.f_star_d2(y - h)) / (2 * h),
                               rtol=1e-5, atol=1e-9)


@pytest.mark.parametrize("fam", FAMILIES, ids=lambda f: f.name)
def test_fenchel_equality_at_f_prime(fam):
    # f*(f'(x)) = x f'(x) - f(x) on the interior of dom f
    x = np.geomspace(0.05, 20.0, 40)
    y = fam.f_prime(x)
    np.testing.assert_allclose(fam.f_star(y), x * y - fam.f(x), rtol=1e-10, atol=1e-12)


@pytest.mark.parametrize("fam", FAMILIES, ids=lambda f: f.name)
def test_fenchel_young_inequality(fam):
    rng = np.random.default_rng(0)
    x = rng.uniform(0.01, 10.0, 200)
    y = _interior(fam, 200)
    assert np.all(fam.f(x) + fam.f_star(y) >= x * y - 1e-12)


def test_generator_is_normalized():
    for fam in FAMILIES:
        assert fam.f(1.0) == pytest.approx(0.0, abs=1e-15)


def test_conjugate_outside_domain_is_infinite():
    assert math.isinf(hellinger().f_star(0.5))
    assert math.isinf(alpha(0.25).f_star(0.0))
    # alpha > 1: finite and constant on y <= 0
    a3 = alpha(3.0)
    assert a3.f_star(-1.0) == pytest.approx(1.0 / 6.0)
    assert a3.f_star(-5.0) == a3.f_star(0.0)


def test_hellinger_conjugate_closed_form():
    y = np.array([-0.5, -1.0, -2.0, -4.0])
    # f(x) = 4 (1 - sqrt x); f*(y) = -4 - 4 / y
    np.testing.assert_allclose(hellinger().f_star(y), -4.0 - 4.0 / y, rtol=1e-14)


@pytest.mark.parametrize("bad", [0.0, 1.0, -0.5, 4.5, float("nan")])
def test_alpha_domain(bad):
    with pytest.raises(DomainError):
        alpha(bad)


def test_family_names():
    assert family_from_name("KL") == kl()
    assert family_from_name("hellinger") == hellinger()
    assert family_from_name("alpha", 0.25) == alpha(0.25)
    assert family_from_name("renyi", 0.5) == Renyi(0.5)
    assert family_from_name("chi2") == chi_squared()
    with pytest.raises(DomainError):
        family_from_name("alpha")
    with pytest.raises(DomainError):
        family_from_name("tv")
    with pytest.raises(DomainError):
        DivergenceFamily("tv")


def test_exact_optimizer_forms():
    ratio = lambda x: np.asarray(x, dtype=float)  # noqa: E731
    x = np.array([0.5, 1.0, 2.0])
    np.testing.assert_allclose(exact_optimizer(kl(), ratio)(x), np.log(x) + 1.0)
    np.testing.assert_allclose(exact_optimizer(hellinger(), ratio)(x), -2.0 / np.sqrt(x))
    np.testing.assert_allclose(exact_optimizer(hellinger(), ratio, "alpha_scale")(x), x**-0.5)
    np.testing.assert_allclose(exact_optimizer(Renyi(0.5), ratio)(x), np.log(x))
    with pytest.raises(DomainError):
        exact_optimizer(kl(), ratio)(np.array([-1.0, 1.0]))


@settings(max_examples=60, deadline=None)
@given(a=st.floats(0.05, 3.9).filter(lambda a: abs(a - 1) > 0.05), x=st.floats(0.01, 50.0))
def test_alpha_conjugacy_property(a, x):
    fam = alpha(a)
    y = fam.f_prime(x)
    assert fam.f_star(y) == pytest.approx(x * y - fam.f(x), rel=1e-9, abs=1e-9)
    assert fam.f_star_d1(y) == pytest.approx(x, rel=1e-9)
