from pathlib import Path

import pytest

from fundbasket.config import RunConfig
from fundbasket.exceptions import ConfigError, DataError
from fundbasket.synth import generate

CONFIGS = Path(__file__).parent.parent / "configs"


def test_committed_configs_load():
    full = RunConfig.from_file(CONFIGS / "nport_2020_2021.toml")
    assert full.source == "edgar" and full.window == ("2020Q1", "2021Q3")
    assert full.ks == (10, 20) and set(full.tasks) == {"NBR", "NBRR", "NNBR"}
    assert len(full.models) == 7
    synth = RunConfig.from_file(CONFIGS / "synth.toml")
    assert synth.synth_config().n_funds == 200


@pytest.mark.parametrize("kwargs", [
    {"source": "ftp"},
    {"models": ["lightgcn"]},
    {"models": []},
    {"ks": [0]},
    {"tasks": ["xyz"]},
    {"empty_target": "drop"},
    {"params": {"ease": {"lam": 1}}},
    {"params": {"neumf": {}}},
    {"window": ["2021Q3", "2020Q1"]},
    {"source": "edgar", "window": ["2020Q1", "2021Q3"], "edgar": {"ciks": []}},
    {"synth": {"n_quarters": 2}},
])
def test_invalid_configs(kwargs):
    with pytest.raises(ConfigError):
        RunConfig(**kwargs)


@pytest.mark.parametrize("split", [
    {"history": ["2020Q1", "2020Q2"], "valid_target": "2020Q2", "test_target": "2020Q3"},
    {"history": ["2020Q1", "2020Q3"], "valid_target": "2020Q2", "test_target": "2020Q4"},
    {"history": ["2020Q1"], "valid_target": "2020Q3", "test_target": "2020Q3"},
    {"history": ["2020Q1"], "valid_target": "2020Q3", "test_target": "2020Q4", "fit_target": "2020Q3"},
    {"history": ["2020Q1"], "valid_target": "2020Q3"},
])
def test_leaky_splits_rejected(split):
    with pytest.raises(ConfigError):
        RunConfig(split=split)


def test_split_override_resolution():
    panel = generate(n_funds=20, n_items=200, n_quarters=8, size_log_mean=2.0)
    cfg = RunConfig(split={"history": ["2020Q2", "2020Q3", "2020Q4"], "valid_target": "2021Q2",
                           "test_target": "2021Q4"})
    split = cfg.resolve_split(panel)
    assert [str(q) for q in split.history] == ["2020Q2", "2020Q3", "2020Q4"]
    bad = RunConfig(split={"history": ["2019Q1"], "valid_target": "2021Q2", "test_target": "2021Q3"})
    with pytest.raises(DataError):
        bad.resolve_split(panel)


def test_round_trip_and_overrides():
    cfg = RunConfig(seed=5, ks=[20, 10, 20], tasks=["nnbr"])
    assert cfg.ks == (10, 20) and cfg.tasks == ("NNBR",)
    assert RunConfig.from_dict(cfg.to_dict()) == cfg
    changed = cfg.with_overrides(seed=9, jobs=2)
    assert changed.seed == 9 and changed.jobs == 2 and changed.tasks == ("NNBR",)
    assert cfg.model_params("random") == {"seed": 5}


def test_bad_toml(tmp_path):
    path = tmp_path / "bad.toml"
    path.write_text("source = \n")
    with pytest.raises(ConfigError):
        RunConfig.from_file(path)
    path.write_text("[eval]\nmodel = ['ease']\n")
    with pytest.raises(ConfigError):
        RunConfig.from_file(path)
    with pytest.raises(ConfigError):
        RunConfig.from_file(tmp_path / "missing.toml")
