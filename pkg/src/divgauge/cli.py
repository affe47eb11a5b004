"""Command-line harness: ``divgauge run | validate | oracle``.

Exit status: 0 on success, 2 when the config (or oracle arguments) fail
validation, 3 when every training run diverged, 1 on any other error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .config import load_config, parse_gaussian, validate_config
from .errors import DivgaugeError, ParseError
from .experiments import (
    AGGREGATE_HEADER,
    TRAINING_KINDS,
    aggregate_runs,
    expand_jobs,
    median_trace,
    run_job,
)
from .families import family_from_name
from .gaussian import oracle_divergence
from .models import save_params
from .plotting import line_chart
from .trainer import write_trace_csv

__all__ = ["main", "run_experiment", "EXIT_OK", "EXIT_INVALID", "EXIT_DIVERGED"]

EXIT_OK, EXIT_ERROR, EXIT_INVALID, EXIT_DIVERGED = 0, 1, 2, 3

CURVATURE_HEADER = ("direction", "objective", "numeric", "closed_form", "rel_err")
VARIANCE_HEADER = ("n", "formula", "mc", "se")
CONSISTENCY_HEADER = ("seed", "objective", "check", "ratio", "target")


def _num(v):
    if isinstance(v, float):
        v = float(v)
        return repr(v) if math.isfinite(v) else ("nan" if math.isnan(v) else ("inf" if v > 0 else "-inf"))
    return v


def _write_rows(path: Path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_num(r[k]) for k in header])


def _run_name(r) -> str:
    p = "" if r["param"] is None else f"_p{r['param']:g}"
    return f"{r['objective']}{p}_seed{r['seed']}"


def _execute(jobs, workers: int):
    if workers == 0:
        workers = os.cpu_count() or 1
    workers = max(1, min(workers, len(jobs)))
    if workers == 1:
        return [run_job(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(run_job, jobs))


def run_experiment(config_path, output=None, workers=None, log=print) -> int:
    """Validate and run one config file; write artifacts; return the exit status."""
    try:
        diags = validate_config(config_path)
    except ParseError as exc:
        log(f"{config_path}: {exc}")
        return EXIT_INVALID
    except OSError as exc:
        log(f"{config_path}: {exc}")
        return EXIT_INVALID
    if diags:
        for d in diags:
            log(f"{config_path}: {d}")
        return EXIT_INVALID
    cfg = load_config(config_path)
    out = Path(output if output is not None else cfg["experiment.output"])
    n_workers = cfg["experiment.workers"] if workers is None else workers
    jobs = expand_jobs(cfg)
    results = _execute(jobs, n_workers)
    out.mkdir(parents=True, exist_ok=True)
    manifest = []  # (file, flag)
    kind = cfg.kind
    status = "complete"

    if kind in TRAINING_KINDS:
        runs = out / "runs"
        runs.mkdir(exist_ok=True)
        for r in results:
            name = _run_name(r)
            write_trace_csv(runs / f"{name}.csv", r["trace"], r["wall_ms"])
            manifest.append((f"runs/{name}.csv", "partial" if r["diverged"] else "ok"))
            if r["params"] is not None and len(r["params"]):
                save_params(runs / f"{name}.dgpm", r["params"])
                manifest.append((f"runs/{name}.dgpm", "ok"))
        agg = aggregate_runs(results)
        _write_rows(out / "aggregate.csv", AGGREGATE_HEADER, agg)
        manifest.append(("aggregate.csv", "ok"))
        targets = {}
        if kind != "sweep":
            for row in agg:
                if math.isfinite(row["oracle"]) and row["oracle"] not in targets.values():
                    targets[f"oracle ({row['objective']})" if targets else "oracle"] = row["oracle"]
        svg = line_chart(median_trace(results), title=cfg["experiment.name"] or kind, xlabel="step",
                         ylabel="objective (median over seeds)", hlines=targets)
        (out / "convergence.svg").write_text(svg, encoding="utf-8")
        manifest.append(("convergence.svg", "ok"))
        if kind == "sweep":
            series = {}
            for row in agg:
                series.setdefault(row["objective"], ([], []))
                series[row["objective"]][0].append(row["param"])
                series[row["objective"]][1].append(row["median_rel_error"])
            (out / "sweep.svg").write_text(line_chart(series, title="median relative error", xlabel="rho",
                                                      ylabel="relative error"), encoding="utf-8")
            manifest.append(("sweep.svg", "ok"))
        n_div = sum(r["diverged"] for r in results)
        for row in agg:
            log(f"{row['objective']:>20} {row['param']!s:>6}  median {row['median_estimate']:.6g}  "
                f"mean {row['mean_estimate']:.6g}  oracle {row['oracle']:.6g}  "
                f"median rel err {row['median_rel_error']:.4g}  diverged {row['diverged']}/{row['runs']}")
        if n_div:
            status = "partial"
        if n_div == len(results):
            status = "diverged"
    elif kind == "curvature":
        rows = results[0]["rows"]
        _write_rows(out / "curvature.csv", CURVATURE_HEADER, rows)
        manifest.append(("curvature.csv", "partial" if any(math.isnan(r["numeric"]) for r in rows) else "ok"))
        for r in rows:
            log(f"{r['direction']:>8} {r['objective']:>7}  numeric {r['numeric']:.8g}  "
                f"closed {r['closed_form']:.8g}  rel err {r['rel_err']:.2e}")
    elif kind == "variance":
        rows = [r["row"] for r in results]
        _write_rows(out / "variance.csv", VARIANCE_HEADER, rows)
        manifest.append(("variance.csv", "ok"))
        d = results[0]["oracle"]
        log(f"divergence {d:.8g}; optimizer-variance formula {results[0]['optimizer_formula']:.6g}")
        for r in rows:
            log(f"n={r['n']}: formula {r['formula']:.6g}  mc {r['mc']:.6g} +- {r['se']:.2g}  "
                f"relative variance {r['mc'] / d**2:.4g}")
        series = {"mc": ([r["n"] for r in rows], [r["mc"] for r in rows]),
                  "formula": ([r["n"] for r in rows], [r["formula"] for r in rows])}
        (out / "variance.svg").write_text(line_chart(series, title="n Var", xlabel="n", ylabel="n Var"),
                                          encoding="utf-8")
        manifest.append(("variance.svg", "ok"))
    elif kind == "consistency":
        rows = [row for r in results for row in r["rows"]]
        _write_rows(out / "consistency.csv", CONSISTENCY_HEADER, rows)
        bad = any(r["diverged"] for r in results) or any(math.isnan(r["ratio"]) for r in rows)
        manifest.append(("consistency.csv", "partial" if bad else "ok"))
        for r in rows:
            log(f"seed {r['seed']} {r['objective']:>18} {r['check']:>16}  ratio {r['ratio']:.4f}")
        if bad:
            status = "partial"
        if results and all(r["diverged"] for r in results):
            status = "diverged"

    text = Path(config_path).read_bytes()
    lines = [f"status: {status}", f"config: {config_path}", f"config_sha256: {hashlib.sha256(text).hexdigest()}",
             f"kind: {kind}", f"jobs: {len(jobs)}"]
    lines += [f"{flag}\t{name}" for name, flag in manifest]
    (out / "MANIFEST").write_text("\n".join(lines) + "\n", encoding="utf-8")
    log(f"wrote {len(manifest)} artifacts to {out} ({status})")
    return EXIT_DIVERGED if status == "diverged" else EXIT_OK


def _cmd_run(args) -> int:
    return run_experiment(args.config, args.output, args.workers)


def _cmd_validate(args) -> int:
    try:
        diags = validate_config(args.config)
    except ParseError as exc:
        print(f"{args.config}: {exc}")
        return EXIT_INVALID
    except OSError as exc:
        print(f"{args.config}: {exc}")
        return EXIT_INVALID
    for d in diags:
        print(f"{args.config}: {d}")
    if not diags:
        print(f"{args.config}: ok")
    return EXIT_INVALID if diags else EXIT_OK


def _cmd_oracle(args) -> int:
    try:
        fam = family_from_name(args.family, args.alpha)
        Q, P = parse_gaussian(args.q), parse_gaussian(args.p)
        value = oracle_divergence(fam, Q, P, method=args.method)
    except (DivgaugeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    print(repr(value))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="divgauge", description="Variational divergence estimation experiments.")
    sub = ap.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run an experiment config")
    r.add_argument("config")
    r.add_argument("--output", "-o", help="output directory (overrides experiment.output)")
    r.add_argument("--workers", type=int, help="worker processes; 0 means all cores (overrides experiment.workers)")
    r.set_defaults(func=_cmd_run)
    v = sub.add_parser("validate", help="check a config and list diagnostics")
    v.add_argument("config")
    v.set_defaults(func=_cmd_validate)
    o = sub.add_parser("oracle", help="ground-truth divergence between two Gaussians")
    o.add_argument("--family", required=True, help="kl, alpha, hellinger, chi2 or renyi")
    o.add_argument("--alpha", type=float, default=None)
    o.add_argument("--q", required=True, help='means:variances, e.g. "0:0.5" or "0,1:1,2"')
    o.add_argument("--p", required=True)
    o.add_argument("--method", default="auto", choices=("auto", "quadrature", "closed"))
    o.set_defaults(func=_cmd_oracle)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except DivgaugeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
