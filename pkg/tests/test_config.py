import pytest

from src.config import SCENARIOS, ConfigError, ExperimentConfig, list_scenarios, merged_config, validate
from src.data_loader import load_config
from src.utils import CONFIG_DIR


def test_list_scenarios_names_every_scenario():
    names = [name for name, _ in list_scenarios()]
    assert names == list(SCENARIOS)
    assert {"carleman", "go-residual", "remainder-bound", "ray-uniqueness", "theorem-2.1",
            "corollary-2.2", "q-recovery"} <= set(names)
    assert all(description for _, description in list_scenarios())


def test_empty_config_has_diagnostics():
    assert validate({}) != []


def test_non_object_config_is_rejected():
    assert validate([1, 2]) == ["config must be a JSON object"]


@pytest.mark.parametrize("scenario", list(SCENARIOS))
def test_default_config_is_valid(scenario):
    assert validate({"scenario": scenario}) == []


@pytest.mark.parametrize("path", sorted(CONFIG_DIR.glob("*.json")), ids=lambda p: p.stem)
def test_shipped_configs_are_valid(path):
    raw = load_config(path)
    assert validate(raw) == []
    assert raw["scenario"] == path.stem


def test_duplicate_lambda_reports_non_monotone_sweep():
    diagnostics = validate({"scenario": "carleman", "lambdas": [8, 16, 16, 32]})
    assert "non-monotone sweep: lambdas must be strictly increasing" in diagnostics


@pytest.mark.parametrize(
    "raw,fragment",
    [
        ({"scenario": "nope"}, "unknown scenario 'nope'"),
        ({"scenario": "carleman", "extra": 1}, "unknown key 'extra'"),
        ({"scenario": "carleman", "grid": {"N": 4}}, "grid.N must be an integer >= 8"),
        ({"scenario": "carleman", "grid": {"dim": 4}}, "grid.dim must be 2 or 3"),
        ({"scenario": "carleman", "grid": {"dim": 3}}, "inconsistent grid/cone"),
        ({"scenario": "carleman", "cone": {"epsilon": 0.5}}, "cone.epsilon must lie in (0, 0.5)"),
        ({"scenario": "carleman", "cone": {"omega0": [0, 0]}}, "cone.omega0 must be nonzero"),
        ({"scenario": "carleman", "coefficients": {"A1": {"preset": "vortex"}}}, "unknown preset 'vortex'"),
        ({"scenario": "carleman", "coefficients": {"q1": {"preset": "swirl"}}}, "unknown preset 'swirl'"),
        ({"scenario": "carleman", "tolerances": {"gauge": -1}}, "tolerance 'gauge' must be a nonnegative number"),
        ({"scenario": "carleman", "tolerances": {"bogus": 1}}, "unknown tolerance 'bogus'"),
        ({"scenario": "carleman", "padding": 0}, "padding must be an integer >= 1"),
        ({"scenario": "carleman", "seed": "x"}, "seed must be an integer"),
    ],
)
def test_validate_reports_specific_problem(raw, fragment):
    assert any(fragment in d for d in validate(raw))


def test_merged_config_applies_scenario_defaults_then_raw():
    cfg = merged_config({"scenario": "theorem-2.1", "grid": {"N": 33}})
    assert cfg["grid"] == {"dim": 2, "N": 33, "M": 8, "T": 1.0}
    assert cfg["cone"]["count"] == 32
    assert cfg["padding"] == 1


def test_from_dict_raises_config_error_with_diagnostics():
    with pytest.raises(ConfigError) as info:
        ExperimentConfig.from_dict({"scenario": "carleman", "lambdas": [2, 1]})
    assert any("non-monotone" in d for d in info.value.diagnostics)


def test_config_hash_is_stable_and_ignores_output_dir():
    a = ExperimentConfig.from_dict({"scenario": "carleman", "output_dir": "/tmp/a"})
    b = ExperimentConfig.from_dict({"scenario": "carleman", "output_dir": "/tmp/b"})
    c = ExperimentConfig.from_dict({"scenario": "carleman", "seed": 1})
    assert a.config_hash() == b.config_hash()
    assert a.config_hash() != c.config_hash()
    assert len(a.config_hash()) == 64


def test_with_overrides_revalidates():
    cfg = ExperimentConfig.default("carleman")
    assert cfg.with_overrides(seed=5).seed == 5
    assert cfg.with_overrides(seed=None).seed == cfg.seed
    with pytest.raises(ConfigError):
        cfg.with_overrides(lambdas=[4.0, 2.0])


def test_build_grid_and_tolerance_table():
    cfg = ExperimentConfig.from_dict({"scenario": "carleman", "tolerances": {"ibp_identity": 0.1}})
    grid = cfg.build_grid()
    assert (grid.dim, grid.N, grid.M, grid.T) == (2, 65, 32, 0.05)
    assert cfg.build_grid(N=17).N == 17
    assert cfg.tolerance_table().ibp_identity == 0.1
