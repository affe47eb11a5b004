"""Diagnostics: curvature at the optimizer, asymptotic variances, consistency ratios.

Curvature is measured along a direction ``psi`` as the second derivative of
``eps -> H_T[phi* + eps psi]`` where ``H_T`` is the LT objective optimized over
a transformation family ``T`` (identity, shift, scale or affine). The numeric
version uses exact Gaussian quadrature expectations, so the only error is the
finite-difference truncation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConvergenceError, DegenerateError, DomainError
from .families import DivergenceFamily, exact_optimizer
from .gaussian import GaussianSpec, log_density_ratio
from .objectives import BatchEval, OBJECTIVES, TransformState
from .quadrature import gauss_hermite_product

__all__ = [
    "TRANSFORMS",
    "CurvatureReport",
    "VarianceReport",
    "polynomial_direction",
    "quadrature_batch",
    "transformed_lt_value",
    "curvature_functional",
    "gateaux_first_derivative",
    "gateaux_second_derivative",
    "numeric_curvatures",
    "kl_hessian_closed_forms",
    "fdiv_hessian_closed_forms",
    "affine_gain_matrix_form",
    "lt_variance",
    "alpha_scale_asymptotic_variance",
    "alpha_variance_at_optimizer",
    "hellinger_relative_variance",
    "influence_functions",
    "delta_method_se",
    "data_processing_check",
    "product_property_check",
]

TRANSFORMS = ("id", "shift", "scale", "affine")


@dataclass
class CurvatureReport:
    direction: str
    closed_form: dict = field(default_factory=dict)
    numeric: dict = field(default_factory=dict)
    eps: tuple = ()
    truncation_radius: float = math.nan

    def rel_err(self, name: str) -> float:
        a, b = self.numeric[name], self.closed_form[name]
        return abs(a - b) / max(abs(b), 1e-12)


@dataclass
class VarianceReport:
    formula_value: float
    mc_value: float
    mc_se: float
    n: int
    repeats: int


def polynomial_direction(coeffs, name: str | None = None):
    """Direction ``psi(x) = sum_k c_k x^k`` on 1-D inputs, with a readable name."""
    poly = np.polynomial.Polynomial(np.asarray(coeffs, dtype=float))
    fn = lambda x: poly(np.asarray(x, dtype=float).reshape(len(np.atleast_1d(x)), -1)[:, 0])  # noqa: E731
    fn.__name__ = name or "poly(" + ",".join(f"{c:g}" for c in coeffs) + ")"
    return fn


def _rule(spec: GaussianSpec):
    if not spec.is_diagonal:
        raise DomainError("quadrature needs a diagonal covariance")
    return gauss_hermite_product(spec.mean, spec.variances)


def quadrature_batch(phi, Q: GaussianSpec, P: GaussianSpec) -> BatchEval:
    """``phi`` evaluated on Gauss-Hermite nodes of Q and P, with their weights."""
    xq, wq = _rule(Q)
    xp, wp = _rule(P)
    return BatchEval(phi(xq), phi(xp), wq, wp)


# -- transformed LT objective and its inner optimization -------------------------
def _lt_parts(family, batch, eta, nu):
    tp = eta * batch.phi_p + nu
    fs = family.f_star(tp)
    if not np.all(np.isfinite(fs)):
        return -math.inf, None, None
    value = eta * float(np.dot(batch.w_q, batch.phi_q)) + nu - float(np.dot(batch.w_p, fs))
    d1 = family.f_star_d1(tp)
    d2 = family.f_star_d2(tp)
    x = batch.phi_p
    mq = float(np.dot(batch.w_q, batch.phi_q))
    grad = np.array([mq - np.dot(batch.w_p, d1 * x), 1.0 - np.dot(batch.w_p, d1)])
    hess = -np.array([[np.dot(batch.w_p, d2 * x * x), np.dot(batch.w_p, d2 * x)],
                      [np.dot(batch.w_p, d2 * x), np.dot(batch.w_p, d2)]])
    return value, grad, hess


def transformed_lt_value(family: DivergenceFamily, batch: BatchEval, transform: str) -> tuple[float, TransformState]:
    """``sup_T E_Q[T(phi)] - E_P[f*(T(phi))]`` over one transformation family.

    ``T(phi) = eta * phi + nu``; ``"shift"`` frees nu, ``"scale"`` frees eta,
    ``"affine"`` frees both. A coarse grid around the identity picks the start
    and damped Newton iterations refine it to machine precision.
    """
    if transform not in TRANSFORMS:
        raise DomainError(f"unknown transform family {transform!r}")
    free = {"id": [], "shift": [1], "scale": [0], "affine": [0, 1]}[transform]
    x = np.array([1.0, 0.0])
    val, grad, hess = _lt_parts(family, batch, *x)
    if not free:
        return val, TransformState(eta=1.0, nu=0.0)
    # coarse grid in the free coordinates
    offsets = np.linspace(-0.5, 0.5, 11)
    for k in free:
        best = (val, x.copy())
        for o in offsets:
            cand = x.copy()
            cand[k] = (x[k] * math.exp(o)) if k == 0 else x[k] + o
            v = _lt_parts(family, batch, *cand)[0]
            if v > best[0]:
                best = (v, cand)
        x = best[1]
    val, grad, hess = _lt_parts(family, batch, *x)
    idx = np.array(free)
    for _ in range(100):
        g = grad[idx]
        H = hess[np.ix_(idx, idx)]
        try:
            step = -np.linalg.solve(H, g)
        except np.linalg.LinAlgError:
            step = g
        t = 1.0
        while t > 1e-12:
            cand = x.copy()
            cand[idx] += t * step
            v, gr, he = _lt_parts(family, batch, *cand)
            if v >= val - 1e-15 * max(1.0, abs(val)):
                break
            t *= 0.5
        else:
            break
        moved = np.max(np.abs(cand - x))
        x, val, grad, hess = cand, v, gr, he
        if moved < 1e-15 * max(1.0, np.max(np.abs(x))):
            break
    if not np.isfinite(val):
        raise ConvergenceError("inner transform optimization left the domain of f*")
    return val, TransformState(eta=float(x[0]), nu=float(x[1]))


def curvature_functional(family: DivergenceFamily, Q: GaussianSpec, P: GaussianSpec, psi, transform: str, phi_star=None):
    """Return ``J(eps) = H_T[phi* + eps psi]`` with quadrature expectations.

    ``phi_star`` defaults to the exact optimizer ``f'(dQ/dP)``.
    """
    lr = log_density_ratio(Q, P)
    phi_star = phi_star or exact_optimizer(family, lambda x: np.exp(lr(x)))
    xq, wq = _rule(Q)
    xp, wp = _rule(P)
    base_q, base_p = phi_star(xq), phi_star(xp)
    dir_q, dir_p = psi(xq), psi(xp)

    def J(eps):
        batch = BatchEval(base_q + eps * dir_q, base_p + eps * dir_p, wq, wp)
        return transformed_lt_value(family, batch, transform)[0]

    J.truncation_radius = float(max(np.max(np.abs(xq)), np.max(np.abs(xp))))
    return J


def gateaux_first_derivative(J, eps: float = 1e-3) -> float:
    return (J(eps) - J(-eps)) / (2.0 * eps)


def _second_difference(J, h, j0):
    return (J(h) - 2.0 * j0 + J(-h)) / (h * h)


def gateaux_second_derivative(J, eps: float = 1e-2, rtol: float = 1e-3) -> float:
    """Central second difference of ``J`` at 0 with Richardson extrapolation.

    Combines step sizes ``eps`` and ``eps/2``. Raises :class:`ConvergenceError`
    when the two raw differences disagree by more than ``rtol`` relative to
    ``max(|extrapolated value|, 1)``.
    """
    if not 1e-4 <= eps <= 1e-1:
        raise DomainError("eps must lie in [1e-4, 1e-1]")
    j0 = J(0.0)
    d1 = _second_difference(J, eps, j0)
    d2 = _second_difference(J, eps / 2.0, j0)
    rich = (4.0 * d2 - d1) / 3.0
    if abs(d1 - d2) > rtol * max(abs(rich), 1.0):
        raise ConvergenceError(f"Richardson steps disagree: {d1:.6g} vs {d2:.6g}")
    return rich


def numeric_curvatures(family, Q, P, psi, eps: float = 1e-2, transforms=TRANSFORMS) -> dict:
    return {t: gateaux_second_derivative(curvature_functional(family, Q, P, psi, t), eps) for t in transforms}


# -- closed forms ---------------------------------------------------------------------
def _psi_name(psi):
    return getattr(psi, "__name__", "psi")


def _tilted_forms(b, phi, psi, w_star):
    """The four curvatures from ``b = E_P[f*''(phi*)]`` and moments under P*."""
    e_psi = float(np.dot(w_star, psi))
    e_psi2 = float(np.dot(w_star, psi * psi))
    var_psi = e_psi2 - e_psi**2
    e_phi = float(np.dot(w_star, phi))
    e_phi2 = float(np.dot(w_star, phi * phi))
    e_phipsi = float(np.dot(w_star, phi * psi))
    var_phi = e_phi2 - e_phi**2
    cov = e_phipsi - e_phi * e_psi
    out = {
        "id": -b * e_psi2,
        "shift": -b * var_psi,
        "scale": -b * (e_psi2 - e_phipsi**2 / e_phi2),
    }
    if var_phi <= 1e-14 * max(1.0, e_phi2):
        raise DomainError("phi* is constant (Q = P); the affine curvature is undefined")
    out["affine"] = -b * (var_psi - cov * cov / var_phi)
    return out


def fdiv_hessian_closed_forms(family: DivergenceFamily, Q: GaussianSpec, P: GaussianSpec, psi) -> CurvatureReport:
    """Closed-form curvatures for a general f-divergence.

    With ``b = E_P[(f*)''(phi*)]`` and the tilted measure
    ``dP* = (f*)''(phi*) dP / b``: id ``-b E*[psi^2]``, shift ``-b Var*[psi]``,
    scale ``-b (E*[psi^2] - E*[phi* psi]^2 / E*[phi*^2])`` and affine
    ``-b (Var*[psi] - Cov*(phi*, psi)^2 / Var*[phi*])``.
    """
    lr = log_density_ratio(Q, P)
    phi_star = exact_optimizer(family, lambda x: np.exp(lr(x)))
    xp, wp = _rule(P)
    phi = phi_star(xp)
    d2 = family.f_star_d2(phi)
    if not np.all(np.isfinite(d2)) or np.any(d2[wp > 0] <= 0):
        raise DomainError("(f*)'' must be positive and finite at phi*")
    b = float(np.dot(wp, d2))
    w_star = wp * d2 / b
    forms = _tilted_forms(b, phi, psi(xp), w_star)
    return CurvatureReport(_psi_name(psi), forms, truncation_radius=float(np.max(np.abs(xp))))


def affine_gain_matrix_form(family: DivergenceFamily, Q: GaussianSpec, P: GaussianSpec, psi) -> float:
    """Affine curvature as ``id + [h g] M [h g]^T / (bc - a^2)``, ``M = [[b, -a], [-a, c]]``.

    ``a, b, c, g, h`` are the P-moments of ``(f*)''(phi*)`` times ``phi*``,
    ``1``, ``phi*^2``, ``psi`` and ``phi* psi``.
    """
    lr = log_density_ratio(Q, P)
    phi_star = exact_optimizer(family, lambda x: np.exp(lr(x)))
    xp, wp = _rule(P)
    phi, ps = phi_star(xp), psi(xp)
    k = wp * family.f_star_d2(phi)
    a, b, c = float(k @ phi), float(k.sum()), float(k @ (phi * phi))
    g, h = float(k @ ps), float(k @ (phi * ps))
    vec = np.array([h, g])
    M = np.array([[b, -a], [-a, c]])
    return -float(k @ (ps * ps)) + float(vec @ M @ vec) / (b * c - a * a)


def kl_hessian_closed_forms(Q: GaussianSpec, P: GaussianSpec, psi) -> CurvatureReport:
    """KL curvatures with moments under Q and ``phi* = log(dQ/dP) + 1``.

    id ``-Var_Q[psi] - E_Q[psi]^2``, shift ``-Var_Q[psi]``, affine
    ``-Var_Q[psi] + Cov_Q(phi*, psi)^2 / Var_Q[phi*]`` and scale
    ``-(E_Q[psi^2] - E_Q[phi* psi]^2 / E_Q[phi*^2])``.
    """
    lr = log_density_ratio(Q, P)
    xq, wq = _rule(Q)
    phi = lr(xq) + 1.0
    forms = _tilted_forms(1.0, phi, psi(xq), wq)
    return CurvatureReport(_psi_name(psi), forms, truncation_radius=float(np.max(np.abs(xq))))


# -- asymptotic variance -----------------------------------------------------------------
def _moments(values, weights):
    m = float(np.dot(weights, values))
    return m, float(np.dot(weights, (values - m) ** 2))


def _sample_var_se(vals):
    """Sample variance of ``vals`` and its standard error from the fourth moment."""
    r = len(vals)
    dev = vals - vals.mean()
    s2 = float(dev @ dev / (r - 1))
    m4 = float(np.mean(dev**4))
    se = math.sqrt(max(m4 - s2 * s2 * (r - 3) / (r - 1), 0.0) / r)
    return s2, se


def _mc_repeats(estimator, phi, Q, P, n, repeats, rng):
    vals = np.empty(repeats)
    for r in range(repeats):
        xq, xp = Q.sample(n, rng), P.sample(n, rng)
        vals[r] = estimator(BatchEval(phi(xq), phi(xp)))
    s2, se = _sample_var_se(vals)
    return n * s2, n * se, vals


def _exact_or_empirical(mode, Q, P, rng, n_emp=2_000_000):
    if mode == "exact":
        xq, wq = _rule(Q)
        xp, wp = _rule(P)
    elif mode == "empirical":
        xq, xp = Q.sample(n_emp, rng), P.sample(n_emp, rng)
        wq = np.full(n_emp, 1.0 / n_emp)
        wp = wq
    else:
        raise DomainError("mode must be 'exact' or 'empirical'")
    return xq, wq, xp, wp


def lt_variance(family: DivergenceFamily, phi, Q, P, n: int = 100_000, repeats: int = 200, rng=None,
                mode: str = "exact") -> VarianceReport:
    """``Var_Q[phi] + Var_P[f*(phi)]`` against ``n`` times the Monte Carlo variance."""
    rng = np.random.default_rng() if rng is None else rng
    xq, wq, xp, wp = _exact_or_empirical(mode, Q, P, rng)
    formula = _moments(phi(xq), wq)[1] + _moments(family.f_star(phi(xp)), wp)[1]
    if repeats == 0:
        return VarianceReport(formula, math.nan, math.nan, n, 0)
    from .objectives import lt_objective

    mc, se, _ = _mc_repeats(lambda b: lt_objective(family, b).value, phi, Q, P, n, repeats, rng)
    return VarianceReport(formula, mc, se, n, repeats)


def _scale_formula(a, phi_q, wq, phi_p, wp):
    x, var_q = _moments(phi_q, wq)
    psi = phi_p ** (a / (a - 1.0))
    y, var_p = _moments(psi, wp)
    ratio = x / y
    return ratio ** (2 * (a - 1)) * var_q / (a - 1.0) ** 2 + ratio ** (2 * a) * var_p / a**2


def alpha_scale_asymptotic_variance(a: float, phi, Q, P, n: int = 100_000, repeats: int = 200, rng=None,
                                    mode: str = "exact") -> VarianceReport:
    """Delta-method variance of the scale-optimized alpha objective for positive ``phi``,
    compared with ``n`` times the variance over ``repeats`` Monte Carlo estimates."""
    from .objectives import alpha_scale_objective

    a = float(a)
    rng = np.random.default_rng() if rng is None else rng
    xq, wq, xp, wp = _exact_or_empirical(mode, Q, P, rng)
    formula = _scale_formula(a, phi(xq), wq, phi(xp), wp)
    if repeats == 0:
        return VarianceReport(formula, math.nan, math.nan, n, 0)
    mc, se, _ = _mc_repeats(lambda b: alpha_scale_objective(a, b).value, phi, Q, P, n, repeats, rng)
    return VarianceReport(formula, mc, se, n, repeats)


def alpha_variance_at_optimizer(a: float, Q, P) -> float:
    """``|a-1|^-2 Var_Q[r^(a-1)] + a^-2 Var_P[r^a]`` with ``r = dQ/dP`` (quadrature)."""
    lr = log_density_ratio(Q, P)
    xq, wq = _rule(Q)
    xp, wp = _rule(P)
    return (_moments(np.exp((a - 1.0) * lr(xq)), wq)[1] / (a - 1.0) ** 2
            + _moments(np.exp(a * lr(xp)), wp)[1] / a**2)


def hellinger_relative_variance(D: float) -> float:
    """Asymptotic relative variance ``(8 - D) / (2 D)`` at the optimizer."""
    if not 0.0 < D < 8.0:
        raise DomainError("D must lie in (0, 8)")
    return (8.0 - D) / (2.0 * D)


# -- delta-method standard errors for any objective ------------------------------------
def influence_functions(name: str, family, batch: BatchEval, state: TransformState | None = None):
    """Per-sample influence values ``(IF_q, IF_p)`` of an objective viewed as a
    smooth function of Q- and P-expectations, or None if unavailable."""
    st = state or TransformState()
    if name not in OBJECTIVES:
        raise DomainError(f"unknown objective {name!r}")
    q, p = batch.phi_q, batch.phi_p
    if name == "lt":
        t = st.eta * p + st.nu
        return st.eta * q, -family.f_star(t)
    if name in ("dv", "improved_dv"):
        eta = st.eta if name == "improved_dv" else 1.0
        v = eta * p
        lse = float(np.log(np.dot(batch.w_p, np.exp(v - v.max())))) + v.max()
        return eta * q, -np.exp(v - lse)
    if name in ("alpha_scale", "alpha_scale_power"):
        a = family.alpha
        beta = st.beta if name == "alpha_scale_power" else 1.0
        with np.errstate(divide="ignore"):
            lq, lp = beta * np.log(q), beta * a / (a - 1.0) * np.log(p)
        A = float(np.dot(batch.w_q, np.exp(lq)))
        B = float(np.dot(batch.w_p, np.exp(lp)))
        ratio = A / B
        return ratio ** (a - 1.0) * np.exp(lq) / (a - 1.0), -(ratio**a) * np.exp(lp) / a
    if name == "renyi":
        a = family.alpha
        vq, vp = (a - 1.0) * st.beta * q, a * st.beta * p
        eq = np.exp(vq - vq.max())
        ep = np.exp(vp - vp.max())
        return eq / ((a - 1.0) * np.dot(batch.w_q, eq)), -ep / (a * np.dot(batch.w_p, ep))
    if name == "chi2_shift":
        mp = float(np.dot(batch.w_p, p))
        return q.copy(), -p - 0.25 * (p - mp) ** 2
    if name == "chi2_hcr":
        mq, mp = float(np.dot(batch.w_q, q)), float(np.dot(batch.w_p, p))
        v = float(np.dot(batch.w_p, (p - mp) ** 2))
        if v < 1e-12:
            return np.zeros_like(q), np.zeros_like(p)
        diff = mq - mp
        return 2 * diff * q / v, -2 * diff * p / v - diff * diff * (p - mp) ** 2 / (v * v)
    return None


def delta_method_se(name: str, family, batch: BatchEval, state: TransformState | None = None):
    """Standard error of an objective estimate from its influence functions."""
    inf = influence_functions(name, family, batch, state)
    if inf is None:
        return None
    fq, fp = inf
    vq = _moments(fq, batch.w_q)[1]
    vp = _moments(fp, batch.w_p)[1]
    return math.sqrt(vq / batch.n_q + vp / batch.n_p)


# -- consistency identities --------------------------------------------------------------
DEGENERATE_LEVEL = 1e-4


def data_processing_check(est_kernel: float, est_plain: float) -> float:
    """``D(Q x k || P x k) / D(Q || P)``; ideally 1."""
    if abs(est_plain) < DEGENERATE_LEVEL:
        raise DegenerateError("denominator estimate is too small to form a ratio")
    return est_kernel / est_plain


def product_property_check(a: float, factor_estimates, joint_estimate: float) -> float:
    """``[prod_i(a(a-1) D_i + 1) - 1] / (a(a-1))`` divided by the joint estimate."""
    k = a * (a - 1.0)
    d = np.asarray(factor_estimates, dtype=float)
    if np.any(d <= 0):
        raise DegenerateError("per-factor estimates must be positive")
    if abs(joint_estimate) < DEGENERATE_LEVEL:
        raise DegenerateError("joint estimate is too small to form a ratio")
    return float((np.prod(k * d + 1.0) - 1.0) / k) / joint_estimate
