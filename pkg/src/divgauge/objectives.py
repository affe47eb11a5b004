"""Variational objective functionals evaluated on weighted sample batches.

A :class:`BatchEval` holds test-function values on a Q-batch and a P-batch
together with probability weights. Empirical batches use uniform weights;
passing quadrature nodes and weights instead gives "exact expectation"
versions of every objective with no extra code path.

Each objective returns an :class:`ObjectiveValue` with analytic gradients with
respect to every phi value and every active transform scalar. Inner
optimizations that have closed forms (the approximate eta and beta updates)
are differentiated through exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import optimize
from scipy.special import logsumexp

from .errors import ConvergenceError, DomainError
from .families import DivergenceFamily, Renyi

__all__ = [
    "BatchEval",
    "TransformState",
    "ObjectiveValue",
    "lt_objective",
    "dv_objective",
    "improved_dv_objective",
    "approx_improved_dv",
    "alpha_scale_objective",
    "alpha_scale_power_objective",
    "renyi_objective",
    "approx_power_renyi",
    "chi2_hcr_objective",
    "chi2_shift_objective",
    "grid_sup_improved_dv",
    "grid_sup_scale_power",
    "uq_bound",
    "kl_uq_bound",
    "OBJECTIVES",
    "ObjectiveSpec",
    "evaluate_objective",
    "check_compatible",
]

VAR_EPS = 1e-12


def _weights(w, n):
    if w is None:
        return np.full(n, 1.0 / n)
    w = np.asarray(w, dtype=float)
    if w.shape != (n,) or np.any(w < 0) or not w.sum() > 0:
        raise DomainError("weights must be non-negative with positive sum and match the batch")
    return w / w.sum()


@dataclass(frozen=True)
class BatchEval:
    """Test-function values on a Q-batch and a P-batch, with probability weights."""

    phi_q: np.ndarray
    phi_p: np.ndarray
    w_q: np.ndarray = None
    w_p: np.ndarray = None

    def __post_init__(self):
        q = np.asarray(self.phi_q, dtype=float).ravel()
        p = np.asarray(self.phi_p, dtype=float).ravel()
        if q.size < 2 or p.size < 2:
            raise DomainError("each batch needs at least two entries")
        if np.isnan(q).any() or np.isnan(p).any():
            raise DomainError("batch contains NaN")
        object.__setattr__(self, "phi_q", q)
        object.__setattr__(self, "phi_p", p)
        object.__setattr__(self, "w_q", _weights(self.w_q, q.size))
        object.__setattr__(self, "w_p", _weights(self.w_p, p.size))

    @property
    def n_q(self) -> int:
        return self.phi_q.size

    @property
    def n_p(self) -> int:
        return self.phi_p.size

    def map(self, fn) -> "BatchEval":
        """Apply ``fn`` to both value vectors, keeping the weights."""
        return BatchEval(fn(self.phi_q), fn(self.phi_p), self.w_q, self.w_p)


@dataclass
class TransformState:
    """Transformation scalars attached to an objective."""

    eta: float = 1.0
    nu: float = 0.0
    beta: float = 1.0
    train_eta: bool = False
    train_nu: bool = False
    train_beta: bool = False

    def active(self) -> list[str]:
        return [k for k in ("eta", "nu", "beta") if getattr(self, "train_" + k)]


@dataclass
class ObjectiveValue:
    value: float
    grad_phi_q: np.ndarray
    grad_phi_p: np.ndarray
    grad_transform: dict = field(default_factory=dict)
    aux: dict = field(default_factory=dict)


def _neg_inf(batch, **transform):
    return ObjectiveValue(-math.inf, np.zeros(batch.n_q), np.zeros(batch.n_p), {k: 0.0 for k in transform})


def _log_mean_exp(v, w):
    """``log sum_i w_i exp(v_i)`` and the tilted weights ``w e^v / sum``."""
    lse = float(logsumexp(v, b=w))
    if lse == -math.inf:
        return lse, np.zeros_like(w)
    pi = w * np.exp(v - lse)
    return lse, pi


def _tilted_moments(g, pi, c):
    """Mean and variance of ``g`` under weights ``pi`` proportional to ``w e^{c g}``.

    Also returns the derivatives of both moments with respect to each ``g_j``.
    """
    m = float(np.dot(pi, g))
    dev = g - m
    s = float(np.dot(pi, dev * dev))
    dm = pi * (1.0 + c * dev)
    ds = pi * (c * dev * dev + 2.0 * dev - c * s)
    return m, s, dm, ds


# -- Legendre-transform objective --------------------------------------------
def lt_objective(family: DivergenceFamily, batch: BatchEval, eta: float = 1.0, nu: float = 0.0, strict: bool = True):
    """``E_Q[T] - E_P[f*(T)]`` with ``T = eta * phi + nu``.

    With the default ``eta=1, nu=0`` this is the plain Legendre-transform
    bound. If some P-value falls where ``f*`` is infinite the value is
    ``-inf``; with ``strict=True`` this raises :class:`DomainError` instead.
    """
    tq = eta * batch.phi_q + nu
    tp = eta * batch.phi_p + nu
    fs = family.f_star(tp)
    if np.isinf(fs).any():
        if strict:
            raise DomainError(f"phi outside the domain of f* for {family.name}")
        return _neg_inf(batch, eta=0, nu=0)
    d1 = family.f_star_d1(tp)
    value = float(np.dot(batch.w_q, tq) - np.dot(batch.w_p, fs))
    gq = eta * batch.w_q
    gp = -eta * batch.w_p * d1
    gt = {
        "eta": float(np.dot(batch.w_q, batch.phi_q) - np.dot(batch.w_p, d1 * batch.phi_p)),
        "nu": float(1.0 - np.dot(batch.w_p, d1)),
    }
    return ObjectiveValue(value, gq, gp, gt)


# -- KL objectives ------------------------------------------------------------
def improved_dv_objective(batch: BatchEval, eta: float = 1.0) -> ObjectiveValue:
    """``eta E_Q[phi] - log E_P[exp(eta phi)]``; ``eta = 1`` is Donsker-Varadhan."""
    mq = float(np.dot(batch.w_q, batch.phi_q))
    lse, pi = _log_mean_exp(eta * batch.phi_p, batch.w_p)
    value = eta * mq - lse
    gq = eta * batch.w_q
    gp = -eta * pi
    return ObjectiveValue(value, gq, gp, {"eta": mq - float(np.dot(pi, batch.phi_p))})


def dv_objective(batch: BatchEval) -> ObjectiveValue:
    """Donsker-Varadhan bound ``E_Q[phi] - log E_P[exp(phi)]``."""
    out = improved_dv_objective(batch, 1.0)
    out.grad_transform = {}
    return out


def approx_improved_dv(batch: BatchEval, max_with_dv: bool = False) -> ObjectiveValue:
    """Improved DV at the second-order step ``eta = 1 + d_eta(phi)``.

    ``d_eta = (E_Q[phi] - E_Pphi[phi]) / Var_Pphi[phi]`` where ``Pphi`` is
    ``P`` tilted by ``exp(phi)``. The step is zero when the tilted variance is
    below 1e-12. ``max_with_dv`` returns the larger of this value and DV.
    The gradient includes the dependence of ``d_eta`` on phi.
    """
    mq = float(np.dot(batch.w_q, batch.phi_q))
    _, pi = _log_mean_exp(batch.phi_p, batch.w_p)
    m, s, dm, ds = _tilted_moments(batch.phi_p, pi, 1.0)
    if s < VAR_EPS:
        d_eta, dq, dp = 0.0, np.zeros(batch.n_q), np.zeros(batch.n_p)
    else:
        d_eta = (mq - m) / s
        dq = batch.w_q / s
        dp = (-dm * s - (mq - m) * ds) / (s * s)
    out = improved_dv_objective(batch, 1.0 + d_eta)
    slope = out.grad_transform["eta"]
    res = ObjectiveValue(out.value, out.grad_phi_q + slope * dq, out.grad_phi_p + slope * dp, {})
    res.aux["d_eta"] = d_eta
    if max_with_dv:
        dv = dv_objective(batch)
        if dv.value > res.value:
            dv.aux["d_eta"] = d_eta
            return dv
    return res


# -- alpha-divergence objectives ----------------------------------------------
def _scale_core(a, log_q, log_p, w_q, w_p, beta=1.0):
    """Scale-optimized alpha objective on ``phi**beta`` from log phi values.

    Returns the value and its derivatives with respect to log phi (Q, P) and
    beta. ``p = a / (a - 1)``; value ``(A^a B^(1-a) - 1) / (a (a - 1))`` with
    ``A = E_Q[phi^beta]`` and ``B = E_P[phi^(p beta)]``.
    """
    p = a / (a - 1.0)
    with np.errstate(divide="ignore"):
        log_a, rho_q = _log_mean_exp(beta * log_q, w_q)
        log_b, rho_p = _log_mean_exp(p * beta * log_p, w_p)
    if log_b == -math.inf:
        return None
    if log_a == -math.inf:
        # a > 1 only: A = 0 gives K = 0
        k = 0.0
        rho_q = np.zeros_like(w_q)
    else:
        k = math.exp(a * log_a + (1.0 - a) * log_b)
    value = math.expm1(a * log_a + (1.0 - a) * log_b) / (a * (a - 1.0)) if k > 0 else -1.0 / (a * (a - 1.0))
    scale = k / (a - 1.0)
    d_log_q = scale * beta * rho_q
    d_log_p = -scale * beta * rho_p
    lq = np.where(rho_q > 0, log_q, 0.0)
    lp = np.where(rho_p > 0, log_p, 0.0)
    d_beta = scale * (float(np.dot(rho_q, lq)) - float(np.dot(rho_p, lp)))
    return value, d_log_q, d_log_p, d_beta


def _alpha_logs(a, batch):
    if a < 1:
        if np.any(batch.phi_q <= 0) or np.any(batch.phi_p <= 0):
            raise DomainError("alpha in (0,1) needs phi > 0")
    elif np.any(batch.phi_q < 0) or np.any(batch.phi_p < 0):
        raise DomainError("alpha > 1 needs phi >= 0")
    with np.errstate(divide="ignore"):
        return np.log(batch.phi_q), np.log(batch.phi_p)


def _from_log_grads(batch, d_log_q, d_log_p):
    # d/dphi = d/dlog(phi) / phi, with zero where phi == 0 (those entries carry no weight).
    # Tiny phi can overflow to inf; the trainer skips steps with non-finite gradients.
    with np.errstate(over="ignore"):
        gq = np.divide(d_log_q, batch.phi_q, out=np.zeros(batch.n_q), where=batch.phi_q > 0)
        gp = np.divide(d_log_p, batch.phi_p, out=np.zeros(batch.n_p), where=batch.phi_p > 0)
    return gq, gp


def _alpha_of(family):
    if isinstance(family, DivergenceFamily):
        if not family.is_alpha:
            raise DomainError(f"{family.name} is not an alpha family")
        return family.alpha
    return float(family)


def alpha_scale_power_objective(family, beta: float, batch: BatchEval) -> ObjectiveValue:
    """Scale-optimized alpha objective applied to ``phi**beta``.

    ``family`` is an alpha family (or the value of alpha). For ``beta = 1`` this
    is :func:`alpha_scale_objective`. Requires phi > 0 for alpha < 1 and
    phi >= 0 for alpha > 1. The value is ``-inf`` when ``E_P[phi^(a/(a-1))]``
    vanishes on the batch.
    """
    a = _alpha_of(family)
    log_q, log_p = _alpha_logs(a, batch)
    core = _scale_core(a, log_q, log_p, batch.w_q, batch.w_p, beta)
    if core is None:
        return _neg_inf(batch, beta=0)
    value, d_log_q, d_log_p, d_beta = core
    gq, gp = _from_log_grads(batch, d_log_q, d_log_p)
    return ObjectiveValue(value, gq, gp, {"beta": d_beta})


def alpha_scale_objective(family, batch: BatchEval) -> ObjectiveValue:
    """Scale-optimized alpha objective; invariant under ``phi -> c phi``, c > 0.

    For alpha = 1/2 its value is ``4 (1 - sqrt(E_Q[phi] E_P[1/phi]))``.
    """
    out = alpha_scale_power_objective(family, 1.0, batch)
    out.grad_transform = {}
    return out


# -- Renyi objectives ---------------------------------------------------------
def renyi_objective(family, batch: BatchEval, beta: float = 1.0) -> ObjectiveValue:
    """``(a-1)^-1 log E_Q[e^((a-1) beta g)] - a^-1 log E_P[e^(a beta g)]``.

    The batch holds values of ``g``. Invariant under ``g -> g + c``.
    """
    a = family.alpha if isinstance(family, Renyi) else float(family)
    lq, pi_q = _log_mean_exp((a - 1.0) * beta * batch.phi_q, batch.w_q)
    lp, pi_p = _log_mean_exp(a * beta * batch.phi_p, batch.w_p)
    value = lq / (a - 1.0) - lp / a
    d_beta = float(np.dot(pi_q, batch.phi_q) - np.dot(pi_p, batch.phi_p))
    return ObjectiveValue(value, beta * pi_q, -beta * pi_p, {"beta": d_beta})


def approx_power_renyi(family, batch: BatchEval) -> ObjectiveValue:
    """Renyi objective at ``(1 + d_beta) g`` with the second-order step

    ``d_beta = (E_Qa[g] - E_Pa[g]) / ((1-a) Var_Qa[g] + a Var_Pa[g])`` where
    ``Qa`` tilts Q by ``exp((a-1) g)`` and ``Pa`` tilts P by ``exp(a g)``.
    The step is zero when the denominator is below 1e-12. Needs a in (0,1).
    """
    a = family.alpha if isinstance(family, Renyi) else float(family)
    if not 0 < a < 1:
        raise DomainError("approximate power Renyi objective needs alpha in (0,1)")
    g_q, g_p = batch.phi_q, batch.phi_p
    _, pi_q = _log_mean_exp((a - 1.0) * g_q, batch.w_q)
    _, pi_p = _log_mean_exp(a * g_p, batch.w_p)
    mq, sq, dmq, dsq = _tilted_moments(g_q, pi_q, a - 1.0)
    mp, sp, dmp, dsp = _tilted_moments(g_p, pi_p, a)
    den = (1.0 - a) * sq + a * sp
    if den < VAR_EPS:
        d_beta, dq, dp = 0.0, np.zeros(batch.n_q), np.zeros(batch.n_p)
    else:
        num = mq - mp
        d_beta = num / den
        dq = (dmq * den - num * (1.0 - a) * dsq) / (den * den)
        dp = (-dmp * den - num * a * dsp) / (den * den)
    out = renyi_objective(a, batch, 1.0 + d_beta)
    slope = out.grad_transform["beta"]
    res = ObjectiveValue(out.value, out.grad_phi_q + slope * dq, out.grad_phi_p + slope * dp, {})
    res.aux["d_beta"] = d_beta
    return res


# -- chi-squared objectives ---------------------------------------------------
def chi2_hcr_objective(batch: BatchEval) -> ObjectiveValue:
    """``(E_Q[phi] - E_P[phi])^2 / Var_P[phi]``; zero when the variance vanishes."""
    mq = float(np.dot(batch.w_q, batch.phi_q))
    mp, vp, dmp, dvp = _tilted_moments(batch.phi_p, batch.w_p, 0.0)
    if vp < VAR_EPS:
        return ObjectiveValue(0.0, np.zeros(batch.n_q), np.zeros(batch.n_p), {})
    diff = mq - mp
    gq = 2.0 * diff * batch.w_q / vp
    gp = -2.0 * diff * dmp / vp - diff * diff * dvp / (vp * vp)
    return ObjectiveValue(diff * diff / vp, gq, gp, {})


def chi2_shift_objective(batch: BatchEval) -> ObjectiveValue:
    """``E_Q[phi] - E_P[phi] - Var_P[phi] / 4``."""
    mq = float(np.dot(batch.w_q, batch.phi_q))
    mp, vp, dmp, dvp = _tilted_moments(batch.phi_p, batch.w_p, 0.0)
    return ObjectiveValue(mq - mp - 0.25 * vp, batch.w_q.copy(), -dmp - 0.25 * dvp, {})


# -- offline inner optimizers ---------------------------------------------------
def _grid_sup(fun, grid, lo, hi):
    vals = np.array([fun(t) for t in grid])
    i = int(np.nanargmax(vals))
    best_t, best_v = float(grid[i]), float(vals[i])
    a = float(grid[max(i - 1, 0)])
    b = float(grid[min(i + 1, len(grid) - 1)])
    if b > a:
        res = optimize.minimize_scalar(lambda t: -fun(t), bounds=(max(a, lo), min(b, hi)), method="bounded",
                                       options={"xatol": 1e-10})
        if res.success and -res.fun > best_v:
            best_t, best_v = float(res.x), float(-res.fun)
    return best_v, best_t


def grid_sup_improved_dv(batch: BatchEval, lo: float = 0.01, hi: float = 4.0, num: int = 400):
    """Sup over ``eta in [lo, hi]`` of the improved DV objective.

    Fine grid (always containing ``eta = 1``) followed by bounded refinement.
    Returns ``(value, argmax)``.
    """
    grid = np.union1d(np.linspace(lo, hi, num), [1.0])
    return _grid_sup(lambda e: improved_dv_objective(batch, e).value, grid, lo, hi)


def grid_sup_scale_power(family, batch: BatchEval, lo: float = 0.1, hi: float = 5.0, num: int = 400):
    """Sup over ``beta in [lo, hi]`` of the scale+power alpha objective."""
    grid = np.union1d(np.linspace(lo, hi, num), [1.0])
    return _grid_sup(lambda b: alpha_scale_power_objective(family, b, batch).value, grid, lo, hi)


# -- uncertainty-quantification bound ---------------------------------------------
def _log_eta_search(h, log_lo=-8.0, log_hi=8.0, num=161, expansions=2):
    """Minimize ``h(eta)`` over eta > 0 on a log grid, expanding at the edges."""
    for attempt in range(expansions + 1):
        grid = np.linspace(log_lo, log_hi, num)
        vals = np.array([h(math.exp(t)) for t in grid])
        vals = np.where(np.isnan(vals), np.inf, vals)
        i = int(np.argmin(vals))
        if 0 < i < num - 1:
            res = optimize.minimize_scalar(lambda t: h(math.exp(t)), bounds=(grid[i - 1], grid[i + 1]),
                                           method="bounded", options={"xatol": 1e-10})
            return float(min(res.fun, vals[i])) if res.success else float(vals[i])
        width = log_hi - log_lo
        if i == 0:
            log_lo -= width
        else:
            log_hi += width
    raise ConvergenceError("UQ bound minimum lies on the eta-grid boundary after two expansions")


def kl_uq_bound(phi_p, divergence_value: float, w_p=None) -> float:
    """``inf_{eta>0} (log E_P[exp(eta phi)] + D) / eta``: an upper bound on E_Q[phi]
    for every Q with ``KL(Q||P) <= D``."""
    phi_p = np.asarray(phi_p, dtype=float).ravel()
    w = _weights(w_p, phi_p.size)
    if divergence_value < 0:
        raise DomainError("divergence value must be non-negative")
    if divergence_value == 0:
        return float(np.dot(w, phi_p))
    return _log_eta_search(lambda e: (float(logsumexp(e * phi_p, b=w)) + divergence_value) / e)


def _inner_nu(family, y, w):
    """``inf_nu E_P[f*(y - nu)] + nu`` for fixed ``y = eta * phi``."""

    def g(nu):
        return 1.0 - float(np.dot(w, family.f_star_d1(y - nu)))

    def obj(nu):
        return float(np.dot(w, family.f_star(y - nu))) + nu

    if family.kind == "chi2":
        # closed form: nu = E[y] - 1
        return obj(float(np.dot(w, y)) - 1.0)
    top = float(np.max(y))
    step = 1.0 + float(np.std(y))
    if family.is_alpha and family.alpha < 1:
        # nu must exceed max(y); approach that edge until the derivative turns negative
        hi = top + step
        while g(hi) <= 0:
            step *= 2.0
            hi = top + step
        gap = step
        while g(top + gap) >= 0:
            gap /= 16.0
            if top + gap <= top:
                return obj(top + 16.0 * gap)
        lo = top + gap
    else:
        lo, hi = top - step, top + step
        while g(lo) >= 0:
            step *= 2.0
            lo = top - step
        while g(hi) <= 0:
            step *= 2.0
            hi = top + step
    nu = optimize.brentq(g, lo, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps, maxiter=500)
    return obj(nu)


def uq_bound(family: DivergenceFamily, phi_p, divergence_value: float, w_p=None) -> float:
    """Upper bound on ``E_Q[phi]`` over all Q with ``D_f(Q||P) <= divergence_value``.

    Evaluates ``inf_{eta>0, nu} (E_P[f*(eta phi - nu)] + nu + D) / eta``; the
    inner problem in nu is solved by root finding, the outer one on a log grid
    in eta with refinement. ``D = 0`` returns ``E_P[phi]``. For KL the nu-free
    form :func:`kl_uq_bound` is used.
    """
    if family.kind == "kl":
        return kl_uq_bound(phi_p, divergence_value, w_p)
    phi_p = np.asarray(phi_p, dtype=float).ravel()
    w = _weights(w_p, phi_p.size)
    if divergence_value < 0:
        raise DomainError("divergence value must be non-negative")
    if divergence_value == 0:
        return float(np.dot(w, phi_p))
    return _log_eta_search(lambda e: (_inner_nu(family, e * phi_p, w) + divergence_value) / e)


# -- registry -------------------------------------------------------------------
@dataclass(frozen=True)
class ObjectiveSpec:
    """Metadata about an objective used by the trainer and config validation.

    ``model_output`` is ``"real"`` or ``"positive"`` (the model must be wrapped
    by ``exp``). ``negate`` flips the sign of the model output before the
    objective sees it; the LT objective for alpha < 1 needs phi < 0.
    ``transforms`` lists the transform scalars trained jointly by default.
    """

    name: str
    divergence: str  # "kl", "alpha", "renyi", "chi2" or "any"
    model_output: str = "real"
    transforms: tuple = ()


OBJECTIVES = {
    "lt": ObjectiveSpec("lt", "any"),
    "dv": ObjectiveSpec("dv", "kl"),
    "improved_dv": ObjectiveSpec("improved_dv", "kl", transforms=("eta",)),
    "approx_dv": ObjectiveSpec("approx_dv", "kl"),
    "alpha_scale": ObjectiveSpec("alpha_scale", "alpha", "positive"),
    "alpha_scale_power": ObjectiveSpec("alpha_scale_power", "alpha", "positive", ("beta",)),
    "renyi": ObjectiveSpec("renyi", "renyi"),
    "renyi_power_approx": ObjectiveSpec("renyi_power_approx", "renyi"),
    "chi2_hcr": ObjectiveSpec("chi2_hcr", "chi2"),
    "chi2_shift": ObjectiveSpec("chi2_shift", "chi2"),
}


def check_compatible(name: str, family) -> str | None:
    """Return a message if objective ``name`` cannot be used with ``family``."""
    if name not in OBJECTIVES:
        return f"unknown objective {name!r}"
    need = OBJECTIVES[name].divergence
    if isinstance(family, Renyi):
        return None if need == "renyi" else f"objective {name} does not apply to Renyi divergences"
    if need == "any":
        return None
    if need == "alpha":
        return None if family.is_alpha else f"objective {name} needs an alpha family, got {family.name}"
    if need != family.kind:
        return f"objective {name} needs family {need}, got {family.name}"
    return None


def model_output_kind(name: str, family) -> tuple[str, bool]:
    """``(output, negate)`` describing the test function an objective expects."""
    spec = OBJECTIVES[name]
    if name == "lt" and isinstance(family, DivergenceFamily) and family.is_alpha:
        # f* is finite only on y < 0 (a < 1) or regular only on y > 0 (a > 1)
        return "positive", family.alpha < 1
    return spec.model_output, False


def evaluate_objective(name: str, family, batch: BatchEval, state: TransformState | None = None) -> ObjectiveValue:
    """Evaluate objective ``name`` with the transform scalars in ``state``.

    The returned ``grad_transform`` only contains entries for scalars that
    the objective actually uses.
    """
    msg = check_compatible(name, family)
    if msg:
        raise DomainError(msg)
    st = state or TransformState()
    if name == "lt":
        out = lt_objective(family, batch, st.eta, st.nu, strict=False)
        out.grad_transform = {k: v for k, v in out.grad_transform.items() if getattr(st, "train_" + k)}
        return out
    if name == "dv":
        return dv_objective(batch)
    if name == "improved_dv":
        return improved_dv_objective(batch, st.eta)
    if name == "approx_dv":
        return approx_improved_dv(batch)
    if name == "alpha_scale":
        return alpha_scale_objective(family, batch)
    if name == "alpha_scale_power":
        return alpha_scale_power_objective(family, st.beta, batch)
    if name == "renyi":
        out = renyi_objective(family, batch, st.beta)
        if not st.train_beta:
            out.grad_transform = {}
        return out
    if name == "renyi_power_approx":
        return approx_power_renyi(family, batch)
    if name == "chi2_hcr":
        return chi2_hcr_objective(batch)
    return chi2_shift_objective(batch)


def default_state(name: str) -> TransformState:
    """Initial transform state with the objective's default trainable scalars."""
    flags = {"train_" + t: True for t in OBJECTIVES[name].transforms}
    return replace(TransformState(), **flags)
