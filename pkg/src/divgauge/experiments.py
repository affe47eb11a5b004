"""Experiment jobs and the sequential aggregation step.

A config expands into independent jobs (one per objective, seed and sweep
value). Each job is a plain picklable tuple and :func:`run_job` returns a plain
dict, so jobs can run in worker processes. Job results depend only on the
config and the seed, never on the output location.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .analysis import (
    TRANSFORMS,
    alpha_scale_asymptotic_variance,
    alpha_variance_at_optimizer,
    data_processing_check,
    fdiv_hessian_closed_forms,
    gateaux_second_derivative,
    curvature_functional,
    product_property_check,
)
from .config import ExperimentConfig, directions, gaussian_pair, rng_seed_list
from .data import (
    ClassMixture,
    DatasetSource,
    EmbeddingSpec,
    GaussianSource,
    MiPairSampler,
    MiSource,
    TemplateImages,
    mnist_from_env,
    random_translate,
)
from .errors import ConvergenceError, DegenerateError, DivergedError, DomainError
from .families import exact_optimizer
from .gaussian import log_density_ratio, oracle_divergence
from .models import GaussianStatistics, Mlp, MlpSpec, Submanifold
from .trainer import TrainConfig, train

__all__ = ["Job", "expand_jobs", "run_job", "relative_error", "aggregate_runs", "oracle_for", "objective_target"]

TRAINING_KINDS = ("estimate", "mi", "sweep")


@dataclass(frozen=True)
class Job:
    values: dict  # parsed config values
    objective: str
    seed: int
    param: float | None = None  # rho for sweeps, n for variance runs


def _cfg(job: Job) -> ExperimentConfig:
    return ExperimentConfig(job.values)


def train_config(cfg: ExperimentConfig, seed: int) -> TrainConfig:
    t = cfg.values["train"]
    return TrainConfig(steps=t["steps"], minibatch=t["minibatch"], lr=t["lr"], seed=seed,
                       eval_every=t["eval_every"], eval_samples=t["eval_samples"], multiscale=t["multiscale"])


def expand_jobs(cfg: ExperimentConfig) -> list[Job]:
    seeds = rng_seed_list(cfg)
    kind = cfg.kind
    if kind == "curvature":
        return [Job(cfg.values, "curvature", seeds[0])]
    if kind == "variance":
        return [Job(cfg.values, "variance", seeds[0], float(n)) for n in cfg["data.n"]]
    params = cfg["data.rho"] if kind == "sweep" else [None]
    return [Job(cfg.values, name, s, p) for p in params for name in cfg.objectives() for s in seeds]


# -- building blocks --------------------------------------------------------------------
def build_model(cfg: ExperimentConfig, family, input_dim: int):
    if cfg["model.type"] == "submanifold":
        return Submanifold(GaussianStatistics(input_dim), family, cfg["model.mode"])
    return Mlp(MlpSpec(input_dim, tuple(cfg["model.hidden"])))


def _setup_rng(cfg: ExperimentConfig, seed: int):
    # datasets are a function of (setup_seed, run seed) only
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([cfg["data.setup_seed"], seed])))


def mi_sampler(cfg: ExperimentConfig, rho: float) -> MiPairSampler:
    d = cfg["data.d"]
    embed = EmbeddingSpec(cfg["data.embed_dim"], cfg["data.embed_seed"], base_dim=d) if cfg["data.embed_dim"] else None
    return MiPairSampler(d, rho, embed)


class ImagePoolSource:
    """Q and P both draw randomly translated images from one pool (a null pair)."""

    def __init__(self, images, sigma: float):
        self.images = np.asarray(images, dtype=float)
        self.sigma = sigma
        self.dim = self.images[0].size

    def _draw(self, n, rng):
        idx = rng.integers(0, len(self.images), n)
        return random_translate(self.images[idx], self.sigma, rng).reshape(n, -1)

    sample_q = _draw
    sample_p = _draw


class TemplateSource:
    def __init__(self, images: TemplateImages):
        self.images = images
        self.dim = images.dim

    def sample_q(self, n, rng):
        return self.images.sample(n, rng)

    sample_p = sample_q


def image_source(cfg: ExperimentConfig):
    """Translated handwritten digits when ``DIVGAUGE_DATA_DIR`` holds them, else template images."""
    batch = mnist_from_env()
    if batch is not None:
        return ImagePoolSource(batch.images, cfg["data.sigma"])
    return TemplateSource(TemplateImages(cfg["data.image_size"], sigma=cfg["data.sigma"], seed=cfg["data.setup_seed"]))


def make_source(cfg: ExperimentConfig, seed: int, param=None):
    """``(source, eval_data, oracle)``; ``eval_data`` is None when the trainer should draw it."""
    src = cfg["data.source"]
    if src == "mi":
        rho = cfg["data.rho"][0] if param is None else param
        sampler = mi_sampler(cfg, rho)
        return MiSource(sampler), None, oracle_divergence(cfg.family(), sampler.joint_spec(), sampler.product_spec())
    if src == "images":
        return image_source(cfg), None, 0.0
    Q, P = gaussian_pair(cfg)
    oracle = oracle_divergence(cfg.family(), Q, P)
    size = cfg["data.dataset_size"]
    if size:
        rng = _setup_rng(cfg, seed)
        xq, xp = Q.sample(size, rng), P.sample(size, rng)
        m = cfg["train.eval_samples"]
        return DatasetSource(xq, xp), (Q.sample(m, rng), P.sample(m, rng)), oracle
    return GaussianSource(Q, P), None, oracle


def objective_target(name: str, oracle):
    """Value an objective converges to: the chi-squared objectives estimate
    ``chi^2 = 2 D_f`` for ``f(x) = (x^2 - 1)/2``, every other one ``D`` itself."""
    if oracle is None:
        return None
    return 2.0 * oracle if name in ("chi2_hcr", "chi2_shift") else oracle


# -- job runners --------------------------------------------------------------------------
def _train_result(job, fn):
    out = {"objective": job.objective, "seed": job.seed, "param": job.param}
    try:
        rec = fn()
    except DivergedError as exc:
        out.update(trace=getattr(exc, "trace", []), wall_ms=getattr(exc, "wall_ms", []), final_estimate=math.nan,
                   final_se=math.nan, diverged=True, skipped=0, params=None, error=str(exc))
        return out
    out.update(trace=rec.trace, wall_ms=rec.wall_ms, final_estimate=rec.final_estimate, final_se=rec.final_se,
               diverged=False, skipped=rec.skipped_steps, params=rec.params, digest=rec.config_digest, error="")
    return out


def _run_training(job: Job) -> dict:
    cfg = _cfg(job)
    fam = cfg.family()
    source, eval_data, oracle = make_source(cfg, job.seed, job.param)
    model = build_model(cfg, fam, source.dim)
    res = _train_result(job, lambda: train(job.objective, fam, model, source, train_config(cfg, job.seed),
                                           eval_data=eval_data))
    res["oracle"] = objective_target(job.objective, oracle)
    return res


def _run_curvature(job: Job) -> dict:
    cfg = _cfg(job)
    fam = cfg.family()
    Q, P = gaussian_pair(cfg)
    rows = []
    for text, psi in zip(cfg["data.directions"], directions(cfg)):
        closed = fdiv_hessian_closed_forms(fam, Q, P, psi).closed_form
        for t in TRANSFORMS:
            try:
                num = gateaux_second_derivative(curvature_functional(fam, Q, P, psi, t), cfg["data.eps"])
            except ConvergenceError:
                num = math.nan
            cf = closed[t]
            rows.append({"direction": text, "objective": t, "numeric": num, "closed_form": cf,
                         "rel_err": abs(num - cf) / max(abs(cf), 1e-6)})
    return {"objective": "curvature", "seed": job.seed, "param": None, "rows": rows}


def _run_variance(job: Job) -> dict:
    cfg = _cfg(job)
    fam = cfg.family()
    Q, P = gaussian_pair(cfg)
    lr = log_density_ratio(Q, P)
    phi = exact_optimizer(fam, lambda x: np.exp(lr(x)), "alpha_scale")
    n = int(job.param)
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([job.seed, n])))
    rep = alpha_scale_asymptotic_variance(fam.alpha, phi, Q, P, n=n, repeats=cfg["data.repeats"], rng=rng)
    return {"objective": "variance", "seed": job.seed, "param": n,
            "row": {"n": n, "formula": rep.formula_value, "mc": rep.mc_value, "se": rep.mc_se},
            "optimizer_formula": alpha_variance_at_optimizer(fam.alpha, Q, P),
            "oracle": oracle_divergence(fam, Q, P)}


class _PairSource:
    def __init__(self, draw_q, draw_p, dim):
        self.sample_q, self.sample_p, self.dim = draw_q, draw_p, dim


def consistency_sources(cfg: ExperimentConfig):
    """Plain, kernel-paired and two-fold product sources over the class mixture."""
    mix = ClassMixture(cfg["data.mixture_dim"], seed=cfg["data.setup_seed"])
    p_classes = np.arange(cfg["data.classes_p"] + 1)

    def q(n, rng):
        return mix.sample(n, rng)

    def p(n, rng):
        return mix.sample(n, rng, p_classes)

    def with_kernel(draw):
        def f(n, rng):
            x = draw(n, rng)
            return np.hstack([x, mix.kernel(x, rng)])
        return f

    def squared(draw):
        def f(n, rng):
            return np.hstack([draw(n, rng), draw(n, rng)])
        return f

    m = mix.dim
    return {
        "plain": _PairSource(q, p, m),
        "kernel": _PairSource(with_kernel(q), with_kernel(p), 2 * m),
        "product": _PairSource(squared(q), squared(p), 2 * m),
    }


def _run_consistency(job: Job) -> dict:
    cfg = _cfg(job)
    fam = cfg.family()
    tc = train_config(cfg, job.seed)
    ests, diverged = {}, False
    for key, src in consistency_sources(cfg).items():
        res = _train_result(job, lambda: train(job.objective, fam, build_model(cfg, fam, src.dim), src, tc))
        diverged = diverged or res["diverged"]
        ests[key] = res["final_estimate"]
    rows = []
    checks = (("data_processing", lambda: data_processing_check(ests["kernel"], ests["plain"])),
              ("product", lambda: product_property_check(fam.alpha, [ests["plain"]] * 2, ests["product"])))
    for name, fn in checks:
        try:
            ratio = fn()
        except DegenerateError:
            ratio = math.nan
        rows.append({"seed": job.seed, "objective": job.objective, "check": name, "ratio": ratio, "target": 1.0})
    return {"objective": job.objective, "seed": job.seed, "param": None, "rows": rows, "estimates": ests,
            "diverged": diverged}


def run_job(job: Job) -> dict:
    t0 = time.perf_counter()
    kind = job.values["experiment"]["kind"]
    if kind in TRAINING_KINDS:
        out = _run_training(job)
    elif kind == "curvature":
        out = _run_curvature(job)
    elif kind == "variance":
        out = _run_variance(job)
    elif kind == "consistency":
        out = _run_consistency(job)
    else:
        raise DomainError(f"unknown experiment kind {kind!r}")
    out["kind"] = kind
    out["seconds"] = time.perf_counter() - t0
    return out


# -- aggregation ---------------------------------------------------------------------------
ZERO_ORACLE = 1e-12

def relative_error(estimate: float, oracle: float) -> float:
    """``|est - oracle| / max(oracle, 1e-6)``; for a zero oracle the absolute estimate.

    Oracles below 1e-12 (quadrature round-off when Q = P) count as zero.
    """
    if abs(oracle) < ZERO_ORACLE:
        return abs(estimate)
    return abs(estimate - oracle) / max(oracle, 1e-6)


AGGREGATE_HEADER = ("objective", "param", "runs", "diverged", "mean_estimate", "median_estimate", "oracle",
                    "mean_rel_error", "median_rel_error", "rel_error_of_mean_estimate")


def aggregate_runs(results: list[dict]) -> list[dict]:
    """One row per (objective, param) over the training results, in first-seen order."""
    groups: dict = {}
    for r in results:
        groups.setdefault((r["objective"], r["param"]), []).append(r)
    rows = []
    for (name, param), rs in groups.items():
        ok = [r for r in rs if not r["diverged"] and math.isfinite(r["final_estimate"])]
        est = np.array([r["final_estimate"] for r in ok])
        oracle = rs[0].get("oracle", math.nan)
        has_oracle = oracle is not None and math.isfinite(oracle)
        rel = np.array([relative_error(e, oracle) for e in est]) if has_oracle else np.array([])
        nan = math.nan
        rows.append({
            "objective": name,
            "param": "" if param is None else param,
            "runs": len(rs),
            "diverged": len(rs) - len(ok),
            "mean_estimate": float(est.mean()) if est.size else nan,
            "median_estimate": float(np.median(est)) if est.size else nan,
            "oracle": oracle if has_oracle else nan,
            "mean_rel_error": float(rel.mean()) if rel.size else nan,
            "median_rel_error": float(np.median(rel)) if rel.size else nan,
            "rel_error_of_mean_estimate": relative_error(float(est.mean()), oracle) if rel.size else nan,
        })
    return rows


def median_trace(results: list[dict]):
    """Per-objective median of the evaluation objective over seeds, by step."""
    out: dict = {}
    for r in results:
        if not r["trace"]:
            continue
        label = r["objective"] if r["param"] is None else f"{r['objective']} ({r['param']:g})"
        out.setdefault(label, []).append({t[0]: t[1] for t in r["trace"]})
    curves = {}
    for label, runs in out.items():
        steps = sorted(set().union(*runs))
        med = []
        for s in steps:
            vals = [run[s] for run in runs if s in run and math.isfinite(run[s])]
            med.append(float(np.median(vals)) if vals else math.nan)
        curves[label] = (steps, med)
    return curves


def oracle_for(cfg: ExperimentConfig):
    """Ground-truth value for a config when one exists, else None."""
    src = cfg["data.source"]
    if src == "mi":
        s = mi_sampler(cfg, cfg["data.rho"][0])
        return oracle_divergence(cfg.family(), s.joint_spec(), s.product_spec())
    if src == "images":
        return 0.0
    if src == "gaussian":
        return oracle_divergence(cfg.family(), *gaussian_pair(cfg))
    return None
