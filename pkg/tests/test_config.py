import json
import math

import pytest

from modspace.config import (ExperimentConfig, experiment_params, load_config,
                             validate_config)
from modspace.errors import ConfigError


def _paths(err):
    return [path for path, _ in err.value.diagnostics]


def test_defaults_load():
    cfg = load_config(None)
    assert cfg.grid.n == 1
    assert cfg.grid.N == 256
    assert abs(cfg.grid.L - 8 * math.pi) < 1e-12
    assert cfg.window == {"K": 6, "profile": "smooth-bump"}
    assert cfg.corpus_spec.size == 5
    assert cfg.params["p"] == 2.0
    assert cfg.weight_spec.kind == "identity"


def test_file_roundtrip(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({
        "grid": {"N": 512},
        "window": {"K": 4},
        "corpus": {"size": 3, "band_limit": 2.0},
        "params": {"q": 1.5},
        "experiment": "decomposition",
    }))
    cfg = load_config(path)
    assert cfg.grid.N == 512
    assert cfg.window["K"] == 4
    assert cfg.params["q"] == 1.5
    assert cfg.experiment == "decomposition"


def test_missing_file_and_bad_json(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "absent.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigError):
        load_config(bad)


def test_overrides_merge_nested():
    cfg = load_config(None, overrides={"grid": {"N": 1024},
                                       "params": {"s": 1.0}})
    assert cfg.grid.N == 1024
    assert cfg.params["s"] == 1.0
    # untouched defaults survive the merge
    assert cfg.window["K"] == 6


def test_unknown_block_rejected():
    with pytest.raises(ConfigError) as err:
        validate_config({"gird": {}})
    assert "gird" in _paths(err)


def test_bad_grid_fields_named():
    with pytest.raises(ConfigError) as err:
        validate_config({"grid": {"N": 100, "n": 3}})
    paths = _paths(err)
    assert "grid.N" in paths
    assert "grid.n" in paths


def test_q_inf_string_parsed():
    cfg = load_config(None, overrides={"params": {"q": "inf"}})
    assert cfg.params["q"] == math.inf
    with pytest.raises(ConfigError) as err:
        validate_config({"params": {"q": "huge"}})
    assert "params.q" in _paths(err)


def test_invalid_experiment_id():
    with pytest.raises(ConfigError) as err:
        validate_config({"experiment": "window-magic"})
    assert "experiment" in _paths(err)


def test_band_safety_inequality():
    # K too large for the resolvable band: Ximax = N pi / (2L) = 16
    with pytest.raises(ConfigError) as err:
        validate_config({"window": {"K": 15}})
    assert "window.K" in _paths(err)
    assert "Ximax" in str(err.value)


def test_corpus_band_within_reliable_range():
    with pytest.raises(ConfigError) as err:
        validate_config({"corpus": {"band_limit": 5.5}})
    assert "corpus.band_limit" in _paths(err)


def test_paper_scale_cell_population():
    # at K = 6 the finest paper-scale cell needs a denser grid than
    # N = 256 provides
    with pytest.raises(ConfigError) as err:
        validate_config({"params": {"r_convention": "paper-scale"}})
    assert "grid.N" in _paths(err)
    ok = validate_config({"grid": {"N": 2048},
                          "params": {"r_convention": "paper-scale"}})
    assert isinstance(ok, ExperimentConfig)


def test_weight_kind_validated():
    with pytest.raises(ConfigError) as err:
        validate_config({"weight": {"kind": "lebesgue"}})
    assert "weight.kind" in _paths(err)
    cfg = validate_config({"weight": {"kind": "scalar-power", "alpha": 0.5,
                                      "bracket": True}})
    assert cfg.weight_spec.alpha == (0.5,)
    assert cfg.weight_spec.bracket


def test_experiment_params_assembly():
    cfg = load_config(None, overrides={
        "weight": {"kind": "scalar-power", "alpha": 1.0, "bracket": True}})
    prm = experiment_params(cfg)
    assert prm["grid"] is cfg.grid
    assert prm["K"] == 6
    assert prm["profile"] == "smooth-bump"
    assert prm["weight_spec"].kind == "scalar-power"
    ident = experiment_params(load_config(None))
    assert "weight_spec" not in ident
