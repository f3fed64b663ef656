import json

import pytest

import src.main as main_mod
from src.config import ExperimentConfig, list_scenarios


class DummyScenario:
    def __init__(self, config, passed=True):
        self.config = config
        self.passed = passed

    def run(self):
        return {
            "scenario": self.config.scenario,
            "passed": self.passed,
            "checks": [{"name": "dummy", "passed": self.passed, "value": 0.0, "threshold": 1.0, "detail": ""}],
            "measured": {"seed": self.config.seed},
            "table_columns": ["k", "v"],
            "table": [{"k": 1, "v": 2.5}],
            "artifacts": {},
            "fields": {},
        }


@pytest.fixture
def dummy_scenarios(monkeypatch):
    monkeypatch.setattr("src.main.build_scenario", lambda config: DummyScenario(config))


def test_list_prints_every_scenario(capsys):
    assert main_mod.main(["--list"]) == main_mod.EXIT_OK
    out = capsys.readouterr().out
    for name, _ in list_scenarios():
        assert name in out


def test_missing_config_and_scenario(capsys):
    assert main_mod.main([]) == main_mod.EXIT_CONFIG_ERROR
    assert "--config or --scenario" in capsys.readouterr().err


def test_unknown_scenario_is_config_error(capsys):
    assert main_mod.main(["--scenario", "nope", "--validate-only"]) == main_mod.EXIT_CONFIG_ERROR
    assert "config error" in capsys.readouterr().err


def test_threads_must_be_positive():
    assert main_mod.main(["--scenario", "forward", "--threads", "0"]) == main_mod.EXIT_CONFIG_ERROR


def test_missing_config_file(tmp_path, capsys):
    code = main_mod.main(["--config", str(tmp_path / "missing.json")])
    assert code == main_mod.EXIT_CONFIG_ERROR
    assert "not found" in capsys.readouterr().err


def test_config_must_be_object(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text("[1, 2]", encoding="utf-8")
    assert main_mod.main(["--config", str(path)]) == main_mod.EXIT_CONFIG_ERROR


def test_validate_only_all(capsys):
    assert main_mod.main(["--scenario", "all", "--validate-only"]) == main_mod.EXIT_OK
    assert f"{len(list_scenarios())} config(s) valid" in capsys.readouterr().out


def test_cli_overrides_apply(tmp_path):
    args = main_mod.parse_args(["--scenario", "carleman", "--seed", "7", "--out", str(tmp_path)])
    raws = main_mod.raw_configs(args)
    assert raws == [{"scenario": "carleman", "seed": 7, "output_dir": str(tmp_path)}]


def test_run_writes_report(dummy_scenarios, tmp_path, capsys):
    code = main_mod.main(["--scenario", "forward", "--out", str(tmp_path), "--html"])

    assert code == main_mod.EXIT_OK
    assert "PASS forward: 1/1 checks" in capsys.readouterr().out
    report = json.loads((tmp_path / "report.json").read_text(encoding="utf-8"))
    assert report["passed"] is True
    assert "forward" in report["wall_clock"]
    assert (tmp_path / "report.html").exists()
    assert (tmp_path / "forward_table.csv").exists()


def test_failed_check_exit_code(monkeypatch, tmp_path):
    monkeypatch.setattr("src.main.build_scenario", lambda config: DummyScenario(config, passed=False))
    assert main_mod.main(["--scenario", "forward", "--out", str(tmp_path)]) == main_mod.EXIT_CHECK_FAILED


def test_run_all_in_threads(dummy_scenarios, tmp_path):
    assert main_mod.main(["--scenario", "all", "--out", str(tmp_path), "--threads", "4"]) == main_mod.EXIT_OK
    report = json.loads((tmp_path / "report.json").read_text(encoding="utf-8"))
    assert set(report["scenarios"]) == {name for name, _ in list_scenarios()}
    assert all(entry["passed"] is not False for entry in report["acceptance"].values())


def test_repeated_runs_are_reproducible(dummy_scenarios, tmp_path):
    reports = []
    for run in ("a", "b"):
        config = ExperimentConfig.default("go-residual").with_overrides(output_dir=str(tmp_path / run))
        reports.append(main_mod.run(config))

    assert reports[0].csv_digest == reports[1].csv_digest
    assert reports[0].report_hash() == reports[1].report_hash()
    assert reports[0].acceptance["9"]["value"] == reports[0].csv_digest


def test_run_without_configs():
    with pytest.raises(ValueError, match="No scenario"):
        main_mod.run([])


def test_exit_codes_are_shared_with_utils():
    from src import utils

    assert (main_mod.EXIT_OK, main_mod.EXIT_CHECK_FAILED, main_mod.EXIT_CONFIG_ERROR) == (
        utils.EXIT_OK, utils.EXIT_CHECK_FAILED, utils.EXIT_CONFIG_ERROR)
    assert main_mod.__doc__ and "Exit codes" in main_mod.__doc__
