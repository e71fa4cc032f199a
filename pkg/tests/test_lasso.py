import math

import numpy as np
import pytest

from distdualprox.functions import L1PlusBoxFn, QuadraticBoxFn, ScaledL1Fn, ZeroFn
from distdualprox.lasso import (
    ConfigError,
    ExperimentConfig,
    dump_config,
    generate_lasso,
    generate_lasso_data,
    load_config,
    full_scale_config,
    parse_config,
    sparse_truth,
)
from distdualprox.reference import centralized_solve

DESK = dump_config(ExperimentConfig())


def test_roundtrip():
    cfg = parse_config(DESK)
    assert cfg == ExperimentConfig()


def test_shipped_configs(pytestconfig):
    root = pytestconfig.rootpath / "configs"
    assert load_config(root / "desk.ini") == ExperimentConfig()
    full = load_config(root / "full_scale.ini")
    assert (full.n, full.samples, full.d, full.gamma, full.ub) == (50, 150, 3, 0.1, 0.8)


def test_missing_field_named():
    text = DESK.replace("gamma = 0.1\n", "")
    with pytest.raises(ConfigError, match="problem.gamma"):
        parse_config(text)


def test_missing_section_named():
    text = DESK.replace("[stop]", "[halt]")
    with pytest.raises(ConfigError, match=r"\[stop\]"):
        parse_config(text)


def test_bad_value_reports_line():
    text = DESK.replace("samples = 30", "samples = thirty")
    line = text.splitlines().index("samples = thirty") + 1
    with pytest.raises(ConfigError, match=rf"line {line}, field problem.samples"):
        parse_config(text)


def test_invalid_value_reports_line():
    text = DESK.replace("threshold = 1e-06", "threshold = -1")
    line = text.splitlines().index("threshold = -1") + 1
    with pytest.raises(ConfigError, match=rf"line {line}, field 'threshold'"):
        parse_config(text)


def test_unknown_field_rejected():
    with pytest.raises(ConfigError, match="unknown field graph.colour"):
        parse_config(DESK.replace("[graph]\n", "[graph]\ncolour = red\n"))


def test_syntax_error():
    with pytest.raises(ConfigError):
        parse_config("not an ini file")


@pytest.mark.parametrize("field,value", [("gamma", -0.1), ("mode", "gossip"), ("mapping", "box"),
                                         ("normalization", "l2"), ("samples", 2), ("step_scale", 2.0)])
def test_validation(field, value):
    with pytest.raises(ConfigError):
        ExperimentConfig(**{field: value})


def test_nesterov_switch():
    assert ExperimentConfig(mode="sync", nesterov=True).effective_mode == "sync_nesterov"
    with pytest.raises(ConfigError):
        ExperimentConfig(mode="async_node", nesterov=True).effective_mode


def test_sparse_truth_support():
    x = sparse_truth(3, 0)
    assert np.count_nonzero(x) == 2
    assert np.count_nonzero(sparse_truth(8, 5)) == 4


def test_generation_deterministic():
    a, b = generate_lasso_data(ExperimentConfig()), generate_lasso_data(ExperimentConfig())
    for fa, fb in zip(a.problem.fs, b.problem.fs):
        assert np.array_equal(fa.A, fb.A) and np.array_equal(fa.b, fb.b)
    c = generate_lasso_data(ExperimentConfig(data_seed=3))
    assert not np.array_equal(a.problem.fs[0].A, c.problem.fs[0].A)


def test_normalisation_modes():
    cfg = ExperimentConfig()
    by_m = generate_lasso(cfg).fs[0]
    by_sqrt = generate_lasso(ExperimentConfig(normalization="sqrt_m")).fs[0]
    assert np.allclose(by_m.A * 30, by_sqrt.A * math.sqrt(30))
    assert by_m.sigma == pytest.approx(by_m.lambda_min)


def test_mappings_share_the_optimum():
    sols = {}
    for mapping in ("box-in-f", "box-in-g"):
        P = generate_lasso(ExperimentConfig(mapping=mapping))
        sols[mapping] = centralized_solve(P).x_opt
    assert np.allclose(sols["box-in-f"], sols["box-in-g"], atol=1e-10)


def test_mapping_types():
    P = generate_lasso(ExperimentConfig(mapping="box-in-f"))
    assert isinstance(P.gs[0], ScaledL1Fn) and P.fs[0].has_box
    assert P.gs[0].weight == pytest.approx(0.1 / 10)
    P = generate_lasso(ExperimentConfig(mapping="box-in-g"))
    assert isinstance(P.gs[0], L1PlusBoxFn) and not P.fs[0].has_box
    P = generate_lasso(ExperimentConfig(mapping="indicator-only"))
    assert isinstance(P.gs[0], ZeroFn) and isinstance(P.fs[0], QuadraticBoxFn) and P.fs[0].has_box


def test_full_scale_generation():
    data = generate_lasso_data(full_scale_config())
    assert data.problem.n == 50 and data.problem.fs[0].A.shape == (150, 3)
    assert data.resampled == []


def test_default_optimum_structure(desk):
    _, _, ref = desk
    x = ref.x_opt
    assert np.any(np.abs(np.abs(x) - 0.8) <= 1e-4)
    assert np.any(np.abs(x) <= 1e-4)
