from pathlib import Path

import numpy as np
import pytest

from divgauge.config import (
    directions,
    gaussian_pair,
    load_config,
    parse_config,
    parse_gaussian,
    parse_polynomial,
    rng_seed_list,
    validate_config,
)
from divgauge.errors import DivgaugeError, DomainError, ParseError

CONFIGS = sorted((Path(__file__).resolve().parents[1] / "configs").glob("*.ini"))

BASE = """\
[experiment]
kind = estimate
repeat = 2

[divergence]
family = {family}

[objective]
names = {names}

[data]
q = 0:0.5
p = 0:1
{extra}
[train]
steps = 10
minibatch = {mb}
"""


def cfg_text(family="kl", names="lt", mb=100, extra=""):
    return BASE.format(family=family, names=names, mb=mb, extra=extra)


@pytest.mark.parametrize("path", CONFIGS, ids=lambda p: p.stem)
def test_shipped_configs_validate(path):
    assert validate_config(path) == []


def test_defaults_and_types():
    cfg = parse_config(cfg_text())
    assert cfg.kind == "estimate"
    assert cfg["train.lr"] == 1e-3 and cfg["model.hidden"] == [64]
    assert cfg.objectives() == ["lt"]
    assert rng_seed_list(cfg) == [0, 1]
    Q, P = gaussian_pair(cfg)
    assert Q.dim == 1 and float(Q.cov[0, 0]) == 0.5


def test_syntax_error_has_line_and_column():
    text = "[experiment]\nkind = estimate\nthis line is broken\n"
    with pytest.raises(ParseError) as info:
        parse_config(text)
    assert info.value.line == 3
    assert info.value.column >= 1


def test_unknown_key_and_bad_value_reported_with_position():
    cfg = parse_config(cfg_text(extra="colour = blue\n"))
    assert any("colour" in d for d in cfg.diagnostics)
    cfg = parse_config(cfg_text(mb="many"))
    assert any("train.minibatch" in d for d in cfg.diagnostics)


def test_missing_required_section():
    cfg = parse_config("[experiment]\nkind = estimate\n")
    diags = validate_config(cfg)
    assert any("divergence" in d for d in diags) and any("objective" in d for d in diags)


def test_renyi_objective_with_chi2_names_both_fields():
    diags = validate_config(parse_config(cfg_text(family="chi2", names="renyi")))
    assert any("objective.names" in d and "divergence.family" in d for d in diags)


def test_minibatch_larger_than_dataset():
    diags = validate_config(parse_config(cfg_text(mb=500, extra="dataset_size = 200\n")))
    assert any("train.minibatch" in d and "dataset_size" in d for d in diags)


def test_unknown_objective_and_kind():
    diags = validate_config(parse_config(cfg_text(names="lt, magic")))
    assert any("magic" in d for d in diags)
    diags = validate_config(parse_config(cfg_text().replace("kind = estimate", "kind = dance")))
    assert any("experiment.kind" in d for d in diags)


def test_gaussian_spec_parsing():
    g = parse_gaussian("1,2:0.5,3")
    np.testing.assert_array_equal(g.mean, [1, 2])
    np.testing.assert_array_equal(np.diag(g.cov), [0.5, 3])
    for bad in ("1,2:3,4,5", "0:-1", "nonsense"):
        with pytest.raises(DivgaugeError):
            parse_gaussian(bad)


def test_polynomial_parsing():
    assert parse_polynomial("x") == [0.0, 1.0]
    assert parse_polynomial("x^2") == [0.0, 0.0, 1.0]
    assert parse_polynomial("1+x") == [1.0, 1.0]
    assert parse_polynomial("2 - 0.5x^3") == [2.0, 0.0, 0.0, -0.5]
    with pytest.raises(DomainError):
        parse_polynomial("sin(x)")


def test_directions_are_callable():
    cfg = load_config(next(p for p in CONFIGS if p.stem == "curvature_kl"))
    dirs = directions(cfg)
    assert [d.__name__ for d in dirs] == ["x", "x^2", "1+x"]
    np.testing.assert_allclose(dirs[1](np.array([[3.0]])), [9.0])
