"""Experiment configuration: an INI-style file with typed keys, one experiment per file.

Parsing turns syntax problems into :class:`ParseError` (with line and column).
Validation never raises; it returns diagnostics of the form
``"section.key: message"``, and an empty list means the file is runnable.
"""

from __future__ import annotations

import configparser
import re
from dataclasses import dataclass, field
from pathlib import Path

from .errors import DomainError, ParseError
from .families import Renyi, family_from_name
from .gaussian import GaussianSpec
from .objectives import OBJECTIVES, check_compatible

__all__ = ["SCHEMA", "ExperimentConfig", "load_config", "parse_config", "validate_config", "parse_gaussian",
           "parse_polynomial"]

KINDS = ("estimate", "mi", "curvature", "variance", "consistency", "sweep")
SOURCES = ("gaussian", "mi", "images", "mixture")
MODELS = ("mlp", "submanifold")


def _int(s):
    return int(s)


def _float(s):
    return float(s)


def _str(s):
    return s.strip()


def _list(conv):
    def parse(s):
        return [conv(t) for t in re.split(r"[,\s]+", s.strip()) if t]

    return parse


def _str_list(s):
    return [t.strip() for t in s.split(";" if ";" in s else ",") if t.strip()]


# section -> key -> (converter, default); a default of ... marks a required key
SCHEMA = {
    "experiment": {
        "kind": (_str, ...),
        "repeat": (_int, 1),
        "workers": (_int, 0),
        "output": (_str, "out"),
        "name": (_str, ""),
    },
    "divergence": {
        "family": (_str, ...),
        "alpha": (_float, None),
    },
    "objective": {
        "names": (_str_list, ...),
    },
    "model": {
        "type": (_str, "mlp"),
        "hidden": (_list(_int), [64]),
        "mode": (_str, "generic"),
    },
    "data": {
        "source": (_str, "gaussian"),
        "q": (_str, None),
        "p": (_str, None),
        "d": (_int, 20),
        "rho": (_list(_float), [0.7]),
        "embed_dim": (_int, 0),
        "embed_seed": (_int, 0),
        "dataset_size": (_int, 0),
        "setup_seed": (_int, 0),
        "image_size": (_int, 28),
        "sigma": (_float, 3.0),
        "classes_p": (_int, 4),
        "mixture_dim": (_int, 8),
        "directions": (_str_list, ["x", "x^2", "1+x"]),
        "n": (_list(_int), [100_000]),
        "repeats": (_int, 200),
        "eps": (_float, 1e-2),
    },
    "train": {
        "steps": (_int, 1000),
        "minibatch": (_int, 100),
        "lr": (_float, 1e-3),
        "seed": (_int, 0),
        "eval_every": (_int, 100),
        "eval_samples": (_int, 10_000),
        "multiscale": (_int, 1),
    },
}

REQUIRED_SECTIONS = ("experiment", "divergence", "objective")


@dataclass
class ExperimentConfig:
    values: dict
    path: str = ""
    diagnostics: list = field(default_factory=list)

    def __getitem__(self, key):
        sec, k = key.split(".")
        return self.values[sec][k]

    @property
    def kind(self) -> str:
        return self["experiment.kind"]

    def family(self):
        return family_from_name(self["divergence.family"], self["divergence.alpha"])

    def objectives(self) -> list[str]:
        return list(self["objective.names"])


def parse_gaussian(text: str) -> GaussianSpec:
    """``"m1,m2,...:v1,v2,..."`` (means, then diagonal variances) to a GaussianSpec.

    A single variance is broadcast over all coordinates; ``"0:0.5"`` is N(0, 1/2).
    """
    try:
        means_s, vars_s = text.split(":")
        means = [float(t) for t in means_s.split(",")]
        var = [float(t) for t in vars_s.split(",")]
    except ValueError as exc:
        raise DomainError(f"cannot parse Gaussian spec {text!r}; expected means:variances") from exc
    if len(var) == 1:
        var = var * len(means)
    if len(means) == 1 and len(var) > 1:
        means = means * len(var)
    return GaussianSpec(means, var)


_TERM = re.compile(r"^([+-]?\d*\.?\d*(?:e[+-]?\d+)?)\*?(x(?:\^(\d+))?)?$")


def parse_polynomial(text: str) -> list[float]:
    """Parse ``"1+x"``, ``"x^2"``, ``"0.5*x^3-2x"`` into coefficients ``[c0, c1, ...]``."""
    s = text.replace(" ", "").replace("**", "^")
    if not s:
        raise DomainError("empty polynomial")
    terms = re.findall(r"[+-]?[^+-]+", s.replace("e-", "e#").replace("e+", "e@"))
    coeffs: dict[int, float] = {}
    for t in terms:
        t = t.replace("e#", "e-").replace("e@", "e+")
        m = _TERM.match(t)
        if not m or (not m.group(1).strip("+-") and not m.group(2)):
            raise DomainError(f"cannot parse polynomial term {t!r}")
        c_s, xs, pw = m.groups()
        c = float(c_s + "1") if c_s in ("", "+", "-") else float(c_s)
        k = 0 if not xs else (int(pw) if pw else 1)
        coeffs[k] = coeffs.get(k, 0.0) + c
    out = [0.0] * (max(coeffs) + 1)
    for k, c in coeffs.items():
        out[k] = c
    return out


def _read_parser(text: str, path: str):
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",), strict=True)
    cp.optionxform = str.lower
    try:
        cp.read_string(text, source=path)
    except configparser.MissingSectionHeaderError as exc:
        raise ParseError("content before the first section header", exc.lineno, 1) from exc
    except configparser.DuplicateSectionError as exc:
        raise ParseError(f"duplicate section [{exc.section}]", exc.lineno, 1) from exc
    except configparser.DuplicateOptionError as exc:
        raise ParseError(f"duplicate key {exc.option!r} in [{exc.section}]", exc.lineno, 1) from exc
    except configparser.ParsingError as exc:
        lineno, line = exc.errors[0]
        col = len(line) - len(line.lstrip()) + 1 if isinstance(line, str) else 1
        raise ParseError(f"malformed line {line!r}", lineno, col) from exc
    return cp


def parse_config(text: str, path: str = "<string>") -> ExperimentConfig:
    """Parse and type-convert a config; conversion problems become diagnostics."""
    cp = _read_parser(text, path)
    diags = []
    values = {}
    for sec, keys in SCHEMA.items():
        values[sec] = {}
        have = cp[sec] if cp.has_section(sec) else {}
        if not have and sec in REQUIRED_SECTIONS:
            diags.append(f"{sec}: missing required section")
        for key, (conv, default) in keys.items():
            if key in have:
                try:
                    values[sec][key] = conv(have[key])
                except (ValueError, TypeError) as exc:
                    diags.append(f"{sec}.{key}: invalid value {have[key]!r} ({exc})")
                    values[sec][key] = None if default is ... else default
            else:
                if default is ... and have:
                    diags.append(f"{sec}.{key}: required key missing")
                values[sec][key] = None if default is ... else default
    for sec in cp.sections():
        if sec not in SCHEMA:
            diags.append(f"{sec}: unknown section")
            continue
        for key in cp[sec]:
            if key not in SCHEMA[sec]:
                diags.append(f"{sec}.{key}: unknown key")
    return ExperimentConfig(values, path, diags)


def load_config(path) -> ExperimentConfig:
    p = Path(path)
    return parse_config(p.read_text(encoding="utf-8"), str(p))


def _semantic(cfg: ExperimentConfig) -> list[str]:
    diags = []
    v = cfg.values
    kind = v["experiment"]["kind"]
    if kind is not None and kind not in KINDS:
        diags.append(f"experiment.kind: unknown kind {kind!r}; expected one of {', '.join(KINDS)}")
    if v["experiment"]["repeat"] is not None and v["experiment"]["repeat"] < 1:
        diags.append("experiment.repeat: must be at least 1")
    fam = None
    if v["divergence"]["family"] is not None:
        try:
            fam = cfg.family()
        except DomainError as exc:
            diags.append(f"divergence.family: {exc}")
    names = v["objective"]["names"] or []
    for name in names:
        if name not in OBJECTIVES:
            diags.append(f"objective.names: unknown objective {name!r}")
        elif fam is not None:
            msg = check_compatible(name, fam)
            if msg:
                diags.append(f"objective.names, divergence.family: {msg}")
    if "renyi_power_approx" in names and isinstance(fam, Renyi) and fam.alpha > 1:
        diags.append("objective.names, divergence.alpha: renyi_power_approx needs alpha in (0,1)")
    d = v["data"]
    src = d["source"]
    if src not in SOURCES:
        diags.append(f"data.source: unknown source {src!r}")
    needs_gauss = kind in ("estimate", "curvature", "variance") and src == "gaussian"
    if needs_gauss or (kind in ("estimate",) and src == "gaussian"):
        for key in ("q", "p"):
            if d[key] is None:
                diags.append(f"data.{key}: required for Gaussian sources")
            else:
                try:
                    parse_gaussian(d[key])
                except Exception as exc:  # FactorizationError or DomainError
                    diags.append(f"data.{key}: {exc}")
        if d["q"] and d["p"]:
            try:
                if parse_gaussian(d["q"]).dim != parse_gaussian(d["p"]).dim:
                    diags.append("data.q, data.p: dimensions differ")
            except Exception:
                pass
    if kind in ("mi", "sweep"):
        if src != "mi":
            diags.append(f"data.source: experiment kind {kind} needs source 'mi'")
        for r in d["rho"] or []:
            if not -1 < r < 1:
                diags.append(f"data.rho: {r} outside (-1, 1)")
        if d["embed_dim"] and d["embed_dim"] <= d["d"]:
            diags.append("data.embed_dim: must exceed data.d (or be 0 for no embedding)")
    if kind == "consistency" and src != "mixture":
        diags.append("data.source: consistency checks run on the 'mixture' source")
    if kind == "consistency" and fam is not None and not isinstance(fam, Renyi) and not fam.is_alpha:
        diags.append("divergence.family: consistency checks need an alpha family")
    if kind == "variance" and (fam is None or isinstance(fam, Renyi) or not fam.is_alpha):
        diags.append("divergence.family: variance experiments need an alpha family")
    if kind == "curvature":
        if isinstance(fam, Renyi):
            diags.append("divergence.family: curvature needs an f-divergence family")
        for text in d["directions"] or []:
            try:
                parse_polynomial(text)
            except DomainError as exc:
                diags.append(f"data.directions: {exc}")
        if d["eps"] is not None and not 1e-4 <= d["eps"] <= 1e-1:
            diags.append("data.eps: must lie in [1e-4, 1e-1]")
    m = v["model"]
    if m["type"] not in MODELS:
        diags.append(f"model.type: unknown model {m['type']!r}")
    if m["type"] == "mlp" and any(h < 1 for h in (m["hidden"] or [])):
        diags.append("model.hidden: widths must be at least 1")
    if m["type"] == "submanifold":
        if m["mode"] not in ("generic", "kl-linear", "alpha-scale"):
            diags.append(f"model.mode: unknown submanifold mode {m['mode']!r}")
        if src != "gaussian":
            diags.append("model.type, data.source: submanifold models need Gaussian data")
        if isinstance(fam, Renyi):
            diags.append("model.type, divergence.family: submanifold models need an f-divergence family")
        elif fam is not None and m["mode"] == "alpha-scale" and not fam.is_alpha:
            diags.append("model.mode, divergence.family: alpha-scale mode needs an alpha family")
    t = v["train"]
    for key in ("steps", "minibatch", "eval_every", "eval_samples", "multiscale"):
        if t[key] is not None and t[key] < 1:
            diags.append(f"train.{key}: must be positive")
    if t["lr"] is not None and not t["lr"] > 0:
        diags.append("train.lr: must be positive")
    if t["minibatch"] is not None and t["minibatch"] < 2:
        diags.append("train.minibatch: must be at least 2")
    size = d["dataset_size"]
    if size and t["minibatch"] and t["minibatch"] > size:
        diags.append(f"train.minibatch: {t['minibatch']} exceeds data.dataset_size {size}")
    return diags


def validate_config(path_or_cfg) -> list[str]:
    """Diagnostics for a config path (or a parsed config); empty means runnable.

    Raises :class:`ParseError` when the file is not syntactically valid.
    """
    cfg = path_or_cfg if isinstance(path_or_cfg, ExperimentConfig) else load_config(path_or_cfg)
    diags = list(cfg.diagnostics)
    if not diags:
        diags.extend(_semantic(cfg))
    return diags


def gaussian_pair(cfg: ExperimentConfig):
    return parse_gaussian(cfg["data.q"]), parse_gaussian(cfg["data.p"])


def directions(cfg: ExperimentConfig):
    from .analysis import polynomial_direction

    return [polynomial_direction(parse_polynomial(t), t) for t in cfg["data.directions"]]


def rng_seed_list(cfg: ExperimentConfig) -> list[int]:
    base = cfg["train.seed"]
    return [base + r for r in range(cfg["experiment.repeat"])]
