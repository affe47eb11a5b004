"""Joint stochastic gradient ascent over model parameters and transform scalars."""

from __future__ import annotations

import csv
import hashlib
import json
import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .analysis import delta_method_se
from .data import make_streams
from .errors import DivergedError, DomainError
from .models import ExpWrapper
from .objectives import (
    BatchEval,
    TransformState,
    check_compatible,
    default_state,
    evaluate_objective,
    model_output_kind,
)

__all__ = [
    "TrainConfig",
    "AdamState",
    "adam_step",
    "RunRecord",
    "adapt_model",
    "train",
    "estimate_divergence",
    "TRACE_HEADER",
    "FrozenFunction",
    "write_trace_csv",
]

TRACE_HEADER = ("step", "objective_eval", "eta", "nu", "beta", "wall_ms")


@dataclass(frozen=True)
class TrainConfig:
    steps: int = 1000
    minibatch: int = 100
    lr: float = 1e-3
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0
    eval_every: int = 100
    eval_samples: int = 10_000
    multiscale: int = 1  # transform-only updates per joint update; 1 means plain joint ascent

    def __post_init__(self):
        if self.steps < 1 or self.minibatch < 2 or self.eval_every < 1 or self.eval_samples < 2:
            raise DomainError("steps, eval_every >= 1 and minibatch, eval_samples >= 2 are required")
        if not self.lr > 0:
            raise DomainError("learning rate must be positive")
        if self.multiscale < 1:
            raise DomainError("multiscale must be at least 1")

    def digest(self, *extra) -> str:
        blob = json.dumps([asdict(self), *[repr(e) for e in extra]], sort_keys=True)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0

    @classmethod
    def zeros(cls, n):
        return cls(np.zeros(n), np.zeros(n), 0)


def adam_step(params, grads, state: AdamState, lr: float = 1e-3, beta1: float = 0.9, beta2: float = 0.999,
              eps: float = 1e-8):
    """One Adam step in the ascent direction. Returns the new parameters and updates ``state``."""
    state.t += 1
    state.m = beta1 * state.m + (1.0 - beta1) * grads
    state.v = beta2 * state.v + (1.0 - beta2) * grads * grads
    m_hat = state.m / (1.0 - beta1**state.t)
    v_hat = state.v / (1.0 - beta2**state.t)
    return params + lr * m_hat / (np.sqrt(v_hat) + eps)


@dataclass
class RunRecord:
    objective: str
    trace: list  # (step, value, eta, nu, beta)
    wall_ms: list
    final_estimate: float
    final_se: float
    transform_final: TransformState
    params: np.ndarray
    seed: int
    config_digest: str
    skipped_steps: int = 0
    wall_time: float = 0.0
    diverged: bool = False

    @property
    def steps(self) -> np.ndarray:
        return np.array([t[0] for t in self.trace])

    @property
    def values(self) -> np.ndarray:
        return np.array([t[1] for t in self.trace])

    def to_csv(self, path) -> None:
        write_trace_csv(path, self.trace, self.wall_ms)


def write_trace_csv(path, trace, wall_ms) -> None:
    """Trace rows under :data:`TRACE_HEADER`; floats are written with ``repr`` so they round-trip."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_HEADER)
        for (step, val, eta, nu, beta), ms in zip(trace, wall_ms):
            w.writerow([step, repr(float(val)), repr(eta), repr(nu), repr(beta), f"{ms:.3f}"])


def adapt_model(model, objective: str, family):
    """Wrap ``model`` so its output has the sign the objective needs.

    Real-valued models are wrapped by ``exp`` (or ``-exp``); models whose
    output kind already matches are returned unchanged.
    """
    kind, negate = model_output_kind(objective, family)
    want = "negative" if negate else kind
    have = model.output_kind
    if want == "real" or have == want:
        return model
    if have != "real":
        raise DomainError(f"model output is {have} but objective {objective} needs {want} test functions")
    return ExpWrapper(model, -1.0 if want == "negative" else 1.0)


def _as_batch(model, params, xq, xp):
    out, cache = model.forward_batch(params, np.vstack([xq, xp]))
    return out[: len(xq)], out[len(xq):], cache


def _transform_vector(state: TransformState):
    names = state.active()
    vals = []
    for k in names:
        v = getattr(state, k)
        vals.append(math.log(v) if k == "eta" else v)  # eta = exp(lambda) keeps eta > 0
    return names, np.array(vals, dtype=float)


def _apply_transform(state: TransformState, names, vec):
    for k, v in zip(names, vec):
        setattr(state, k, float(math.exp(v)) if k == "eta" else float(v))


def _transform_grad(state, names, grad_transform):
    return np.array([grad_transform.get(k, 0.0) * (state.eta if k == "eta" else 1.0) for k in names])


def _evaluate(objective, family, model, params, state, xq, xp):
    fq, fp, _ = _as_batch(model, params, xq, xp)
    if np.isnan(fq).any() or np.isnan(fp).any():
        return math.nan, None, None
    batch = BatchEval(fq, fp)
    try:
        out = evaluate_objective(objective, family, batch, state)
    except DomainError:
        return math.nan, batch, None
    return out.value, batch, out


def _trace_row(step, value, state, out):
    eta, beta = state.eta, state.beta
    if out is not None and "d_eta" in out.aux:
        eta = 1.0 + out.aux["d_eta"]
    if out is not None and "d_beta" in out.aux:
        beta = 1.0 + out.aux["d_beta"]
    return (int(step), float(value), float(eta), float(state.nu), float(beta))


def train(objective: str, family, model, source, config: TrainConfig, eval_data=None, state=None,
          init_params=None) -> RunRecord:
    """Maximize an objective by Adam ascent on independent Q/P minibatches.

    ``source`` provides ``sample_q(n, rng)`` and ``sample_p(n, rng)``. Every
    ``eval_every`` steps (and at step 0) the objective is evaluated on a fixed
    held-out pool: ``eval_data = (xq, xp)`` if given, otherwise
    ``eval_samples`` fresh draws from the evaluation stream. Steps with a
    non-finite objective skip the update. Two consecutive NaN evaluations raise
    :class:`DivergedError`.
    """
    msg = check_compatible(objective, family)
    if msg:
        raise DomainError(msg)
    model = adapt_model(model, objective, family)
    streams = make_streams(config.seed)
    params = model.init(streams["init"]) if init_params is None else np.array(init_params, dtype=float)
    state = default_state(objective) if state is None else TransformState(**asdict(state))
    names, tvec = _transform_vector(state)
    if eval_data is None:
        eval_data = (source.sample_q(config.eval_samples, streams["eval"]),
                     source.sample_p(config.eval_samples, streams["eval"]))
    xq_eval, xp_eval = eval_data

    n_theta = params.size
    adam = AdamState.zeros(n_theta + tvec.size)
    adam_t = AdamState.zeros(tvec.size)
    trace, wall, skipped, nan_run = [], [], 0, 0
    t0 = time.perf_counter()

    def record(step):
        nonlocal nan_run
        val, _, out = _evaluate(objective, family, model, params, state, xq_eval, xp_eval)
        trace.append(_trace_row(step, val, state, out))
        wall.append(1e3 * (time.perf_counter() - t0))
        nan_run = nan_run + 1 if math.isnan(val) else 0
        if nan_run >= 2:
            exc = DivergedError(f"evaluation objective was NaN twice in a row (step {step})")
            exc.trace, exc.wall_ms = list(trace), list(wall)  # kept for partial artifacts
            raise exc

    record(0)
    for step in range(1, config.steps + 1):
        xq = source.sample_q(config.minibatch, streams["q"])
        xp = source.sample_p(config.minibatch, streams["p"])
        fq, fp, cache = _as_batch(model, params, xq, xp)
        ok = np.all(np.isfinite(fq)) and np.all(np.isfinite(fp))
        out = None
        if ok:
            batch = BatchEval(fq, fp)
            for _ in range(config.multiscale - 1):
                if not names:
                    break
                inner = evaluate_objective(objective, family, batch, state)
                if not math.isfinite(inner.value):
                    break
                tvec = adam_step(tvec, _transform_grad(state, names, inner.grad_transform), adam_t, config.lr,
                                 config.adam_beta1, config.adam_beta2, config.adam_eps)
                _apply_transform(state, names, tvec)
            try:
                out = evaluate_objective(objective, family, batch, state)
            except DomainError:
                out = None
        if out is None or not math.isfinite(out.value):
            skipped += 1
        else:
            upstream = np.concatenate([out.grad_phi_q, out.grad_phi_p])
            g = np.concatenate([model.backward(params, cache, upstream),
                                _transform_grad(state, names, out.grad_transform)])
            if np.all(np.isfinite(g)):
                full = adam_step(np.concatenate([params, tvec]), g, adam, config.lr, config.adam_beta1,
                                 config.adam_beta2, config.adam_eps)
                params, tvec = full[:n_theta], full[n_theta:]
                _apply_transform(state, names, tvec)
            else:
                skipped += 1
        if step % config.eval_every == 0 or step == config.steps:
            record(step)

    value, se = estimate_divergence(objective, family, model, params, state, xq_eval, xp_eval)
    digest = config.digest(objective, getattr(family, "name", family), type(model).__name__, model.n_params)
    return RunRecord(objective, trace, wall, value, se, state, params, config.seed, digest, skipped,
                     time.perf_counter() - t0)


def estimate_divergence(objective, family, model, params, state, xq, xp, splits: int = 10):
    """Objective value on an evaluation pool, with a standard error.

    The error comes from the delta method when the objective is a smooth
    function of Q- and P-expectations; otherwise from ``splits`` disjoint
    sub-batches.
    """
    state = state or TransformState()
    value, batch, out = _evaluate(objective, family, model, params, state, xq, xp)
    if batch is None or not math.isfinite(value):
        return value, math.nan
    se = delta_method_se(objective, family, batch, state)
    if se is None or not math.isfinite(se):
        parts = []
        for iq, ip in zip(np.array_split(np.arange(len(xq)), splits), np.array_split(np.arange(len(xp)), splits)):
            v = _evaluate(objective, family, model, params, state, xq[iq], xp[ip])[0]
            parts.append(v)
        parts = np.array(parts)
        se = float(np.std(parts, ddof=1) / math.sqrt(splits))
    return value, se


class FrozenFunction:
    """Wrap a fixed function of x as a parameter-free model (for estimates at a known phi)."""

    output_kind = "real"
    n_params = 0

    def __init__(self, fn, output_kind: str = "real"):
        self.fn = fn
        self.output_kind = output_kind

    def init(self, rng=None):
        return np.zeros(0)

    def forward_batch(self, params, X):
        return np.asarray(self.fn(X), dtype=float).ravel(), None

    def backward(self, params, cache, upstream):
        return np.zeros(0)
