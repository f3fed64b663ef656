import math
import warnings

import numpy as np
import pytest

from src.config import ExperimentConfig
from src.grid import ScalarField, SpaceTimeGrid
from src.scenarios import (ACCEPTANCE_CHECKS, SCENARIO_CLASSES, QRecoveryScenario, _gauge_spec, build_scenario,
                           covered_spectrum_error, manufactured_problem, orthogonal_frequency,
                           ramp_boundary_data)


def make_config(tmp_path, scenario, **overrides):
    raw = {"scenario": scenario, "output_dir": str(tmp_path), **overrides}
    return ExperimentConfig.from_dict(raw)


def checks_by_name(result):
    return {c["name"]: c for c in result["checks"]}


def test_every_scenario_is_registered():
    assert set(SCENARIO_CLASSES) == {"forward", "carleman", "go-residual", "remainder-bound", "ray-uniqueness",
                                     "theorem-2.1", "corollary-2.2", "q-recovery"}
    for criterion, (scenario, _) in ACCEPTANCE_CHECKS.items():
        assert scenario in SCENARIO_CLASSES or scenario == "run", criterion


def test_build_scenario_rejects_unknown_name(tmp_path):
    config = ExperimentConfig(scenario="nope", grid={"dim": 2, "N": 9, "M": 8, "T": 1.0}, coefficients={},
                              cone={"omega0": [1.0, 0.0], "epsilon": 0.2, "count": 4}, lambdas=[1.0])
    with pytest.raises(KeyError):
        build_scenario(config)


def test_scenario_rejects_foreign_config(tmp_path):
    with pytest.raises(ValueError):
        QRecoveryScenario(make_config(tmp_path, "forward"))


def test_run_check_step_records_failure_and_warns(tmp_path):
    scenario = build_scenario(make_config(tmp_path, "q-recovery", grid={"N": 9, "M": 8}))

    def boom():
        raise RuntimeError("fail")

    with warnings.catch_warnings(record=True) as w:
        warnings.simplefilter("always")
        scenario._run_check_step("boom", boom)

    assert any(issubclass(x.category, RuntimeWarning) for x in w)
    assert scenario.checks[-1]["name"] == "boom"
    assert scenario.checks[-1]["passed"] is False
    assert "RuntimeError" in scenario.checks[-1]["detail"]
    assert not scenario.passed


def test_manufactured_problem_vanishes_initially_and_on_faces():
    grid = SpaceTimeGrid(2, 9, 8, 1.0)
    exact, source = manufactured_problem(grid)
    assert np.all(exact.values[0] == 0.0)
    assert np.max(np.abs(exact.values[:, ~grid.interior_mask])) < 1e-15
    assert source.sup_norm() > 0


def test_ramp_boundary_data_is_compatible():
    grid = SpaceTimeGrid(2, 9, 8, 2.0)
    f = ramp_boundary_data(grid)
    assert np.all(f.values[0] == 0.0)
    assert np.all(f.values >= 0.0)
    assert np.max(f.values[-1]) == pytest.approx(2.0)


def test_orthogonal_frequency():
    xi = orthogonal_frequency((1.0, 0.0))
    np.testing.assert_allclose(np.abs(xi), [0.0, np.pi])


def test_gauge_spec_lookup():
    gauge = {"preset": "gauge-bump", "scale": 0.2}
    assert _gauge_spec([{"preset": "swirl"}, gauge]) == gauge
    assert _gauge_spec("gauge-bump") == {"preset": "gauge-bump"}
    assert _gauge_spec({"preset": "swirl"}) is None


def test_covered_spectrum_error_of_identical_fields():
    grid = SpaceTimeGrid(2, 9, 8, 1.0)
    q = ScalarField(grid, np.random.default_rng(0).normal(size=grid.shape))
    mesh = tuple(np.meshgrid(np.arange(9.0), np.arange(9.0), indexing="ij"))
    covered = np.zeros((9, 9), dtype=bool)
    assert covered_spectrum_error(q, q * 2.0, covered, mesh) == 0.0
    covered[0, :3] = True
    assert covered_spectrum_error(q, q, covered, mesh) == 0.0
    assert covered_spectrum_error(q * 2.0, q, covered, mesh) == pytest.approx(1.0)


def test_q_recovery_scenario_passes(tmp_path):
    result = build_scenario(make_config(tmp_path, "q-recovery", grid={"N": 17, "M": 8})).run()
    assert result["passed"], result["checks"]
    assert [c["name"] for c in result["checks"]] == ["zero_q", "mode_exact", "q_linearity", "bump_covered"]
    assert len(result["table"]) == 3
    assert set(result["table"][0]) == set(result["table_columns"])
    assert "recovered_q" in result["fields"]


def test_corollary_scenario_twin_and_detectors(tmp_path):
    result = build_scenario(make_config(tmp_path, "corollary-2.2")).run()
    checks = checks_by_name(result)
    assert list(checks) == ["twin_recovery", "certificate_bound", "detector_fires", "trace_detector_fires",
                            "uncertified_gradient"]
    assert checks["twin_recovery"]["passed"], checks["twin_recovery"]
    assert checks["twin_recovery"]["value"] <= 1e-10
    quantities = [row["quantity"] for row in result["table"]]
    assert quantities[:2] == ["data_curl_ratio", "recovery_error"]
    assert result["measured"]["twin"]["data_curl_ratio"] <= 1e-10
    assert checks["certificate_bound"]["passed"]
    assert checks["detector_fires"]["passed"]
    assert "divergences differ" in checks["detector_fires"]["detail"]
    assert checks["trace_detector_fires"]["passed"]
    assert "does not vanish" in checks["trace_detector_fires"]["detail"]


def test_corollary_twin_rejects_pair_with_different_curls(tmp_path):
    config = make_config(tmp_path, "corollary-2.2", grid={"N": 17},
                         coefficients={"A1": {"preset": "swirl"}, "A2": {"preset": "smooth", "scale": 0.3}})
    scenario = build_scenario(config)
    scenario.check_twin()
    check = checks_by_name({"checks": scenario.checks})["twin_recovery"]
    assert not check["passed"]
    assert "carry a curl" in check["detail"]


def test_forward_scenario_exact_checks(tmp_path):
    config = make_config(tmp_path, "forward", grid={"N": 9, "M": 8}, levels=[9, 17])
    result = build_scenario(config).run()
    checks = checks_by_name(result)
    assert list(checks) == ["zero_data_zero_solution", "q_tilde_recomputed", "manufactured_order",
                            "fine_grid_self_oracle", "gauge_invariance", "adjoint_pairing", "max_principle"]
    assert checks["zero_data_zero_solution"]["passed"]
    assert checks["q_tilde_recomputed"]["passed"]
    assert "dn_trace" in result["artifacts"]
    assert "forward_solution" in result["fields"]
    studies = {row["study"] for row in result["table"]}
    assert {"manufactured", "gauge", "fine_grid"} <= studies


def test_ray_uniqueness_exact_checks(tmp_path):
    config = make_config(tmp_path, "ray-uniqueness", grid={"N": 17, "M": 8}, cone={"count": 8})
    result = build_scenario(config).run()
    checks = checks_by_name(result)
    for name in ("linearity", "homogeneous_zero_curl", "attenuation_roundtrip"):
        assert checks[name]["passed"], checks[name]
    assert len(result["table"]) == len(config.epsilons)
    assert result["artifacts"]["ray_data"][0] == ["t", "omega_index", "k_index", "value"]


def test_gradient_annihilation_covers_the_whole_cone(tmp_path):
    config = make_config(tmp_path, "ray-uniqueness", grid={"N": 33, "M": 8})
    scenario = build_scenario(config)
    scenario.check_gradient()
    check = checks_by_name({"checks": scenario.checks})["gradient_annihilation"]
    measured = scenario.measured["gradient_annihilation"]
    assert len(measured["per_direction"]) == config.cone["count"]
    assert measured["per_direction"][0] < 1e-10
    # off-axis rays see the O(h^2) error of the discrete gradient
    assert check["value"] > 1e-8
    assert check["threshold"] == measured["bound"]
    assert check["passed"], check


def test_remainder_bound_reports_sweep(tmp_path):
    config = make_config(tmp_path, "remainder-bound", grid={"N": 9, "M": 8}, lambdas=[2.0, 4.0])
    result = build_scenario(config).run()
    assert [row["lambda"] for row in result["table"]] == [2.0, 4.0]
    assert math.isfinite(result["measured"]["exponent"])


@pytest.mark.slow
@pytest.mark.parametrize("criterion", sorted(c for c, (s, _) in ACCEPTANCE_CHECKS.items() if s != "run"))
def test_acceptance_check_passes_on_default_config(tmp_path, criterion):
    scenario, check = ACCEPTANCE_CHECKS[criterion]
    result = build_scenario(make_config(tmp_path, scenario)).run()
    entry = checks_by_name(result)[check]
    assert entry["passed"], entry
