"""
Experiment configuration: scenario defaults, validation and hashing.
"""
from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import asdict, dataclass, field, replace
from typing import Any

from src.grid import SpaceTimeGrid
from src.presets import A_PRESETS, Q_PRESETS
from src.utils import DEFAULT_TOLERANCES, OUTPUT_DIR, Tolerances


class ConfigError(ValueError):
    """Invalid configuration; ``diagnostics`` lists every problem found."""

    def __init__(self, diagnostics: list[str]):
        self.diagnostics = list(diagnostics)
        super().__init__("; ".join(self.diagnostics))


SWIRL = {"preset": "swirl", "scale": 0.4}
GAUGE = {"preset": "gauge-bump", "scale": 0.4, "center": 0.5, "radius": 0.3}
# the same swirl rebuilt from two parts: equal to SWIRL up to rounding
SPLIT_SWIRL = [{"preset": "swirl", "scale": 0.25}, {"preset": "swirl", "scale": 0.15}]

BASE_DEFAULTS: dict[str, Any] = {
    "grid": {"dim": 2, "N": 33, "M": 32, "T": 1.0},
    "coefficients": {
        "A1": {"preset": "zero"},
        "A2": {"preset": "zero"},
        "q1": {"preset": "zero"},
        "q2": {"preset": "zero"},
    },
    "cone": {"omega0": [1.0, 0.0], "epsilon": 0.2, "count": 16},
    "lambdas": [8.0, 16.0, 32.0, 64.0],
    "tolerances": {},
    "padding": 2,
    "plane_resolution": None,
    "levels": [17, 33, 65],
    "epsilons": [0.05, 0.1, 0.2],
    "output_dir": str(OUTPUT_DIR),
    "seed": 0,
}

SCENARIOS: dict[str, dict[str, Any]] = {
    "forward": {
        "description": "Manufactured-solution convergence, gauge invariance and adjoint consistency of the forward solver",
        "defaults": {
            "grid": {"dim": 2, "N": 33, "M": 32, "T": 0.5},
            "coefficients": {
                "A1": {"preset": "smooth", "scale": 0.4},
                "A2": [{"preset": "smooth", "scale": 0.4}, GAUGE],
                "q1": {"preset": "constant", "value": 1.0},
                "q2": {"preset": "constant", "value": 1.0},
            },
        },
    },
    "carleman": {
        "description": "Boundary Carleman estimate and P1/P2/P3 splitting on the twelve-bump suite",
        "defaults": {
            "grid": {"dim": 2, "N": 65, "M": 32, "T": 0.05},
            "coefficients": {"A2": {"preset": "bound"}},
        },
    },
    "go-residual": {
        "description": "Geometric-optics amplitudes, transport cancellation and bounded remainders",
        "defaults": {
            "grid": {"dim": 2, "N": 65, "M": 64, "T": 1.0},
            "coefficients": {
                "A1": {"preset": "smooth", "scale": 0.5},
                "q1": {"preset": "smooth", "amplitude": 1.0},
            },
        },
    },
    "remainder-bound": {
        "description": "Lambda scaling of the boundary term on the complement of G",
        "defaults": {
            "grid": {"dim": 2, "N": 33, "M": 32, "T": 1.0},
            "coefficients": {"A1": SWIRL},
            "lambdas": [4.0, 8.0, 16.0, 32.0],
        },
    },
    "ray-uniqueness": {
        "description": "Ray-transform laws and curl recovery from cone data over an epsilon sweep",
        "defaults": {
            "grid": {"dim": 2, "N": 33, "M": 8, "T": 1.0},
            "coefficients": {"A1": SWIRL, "A2": [SWIRL, GAUGE]},
        },
    },
    "theorem-2.1": {
        "description": "Gauge recovery of A and aperture recovery of q for a gauge-related pair",
        "defaults": {
            "grid": {"dim": 2, "N": 65, "M": 8, "T": 1.0},
            "coefficients": {
                "A1": SWIRL,
                "A2": [SWIRL, GAUGE],
                "q2": {"preset": "bump", "amplitude": 0.5},
            },
            "cone": {"omega0": [1.0, 0.0], "epsilon": 0.2, "count": 32},
            "padding": 1,
        },
    },
    "corollary-2.2": {
        "description": "Full recovery of divergence-matched convection terms via the harmonic certificate",
        "defaults": {
            "grid": {"dim": 2, "N": 33, "M": 8, "T": 1.0},
            "coefficients": {"A1": SWIRL, "A2": SPLIT_SWIRL},
        },
    },
    "q-recovery": {
        "description": "Fourier recovery of q on the aperture of the direction cone",
        "defaults": {
            "grid": {"dim": 2, "N": 33, "M": 16, "T": 1.0},
            "coefficients": {
                "q1": {"preset": "mode", "bins": [0, 3], "time_bin": 1},
                "q2": {"preset": "zero"},
            },
            "padding": 1,
        },
    },
}

ALLOWED_KEYS = {"scenario", *BASE_DEFAULTS.keys()}


def list_scenarios() -> list[tuple[str, str]]:
    """Scenario names with one-line descriptions, in run order."""
    return [(name, entry["description"]) for name, entry in SCENARIOS.items()]


def _deep_merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _deep_merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def merged_config(raw: dict) -> dict:
    """Raw config merged over the base and scenario defaults."""
    scenario = raw.get("scenario")
    defaults = BASE_DEFAULTS
    if scenario in SCENARIOS:
        defaults = _deep_merge(BASE_DEFAULTS, SCENARIOS[scenario]["defaults"])
    return _deep_merge(defaults, raw)


def _is_number(value) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def _is_int(value) -> bool:
    return isinstance(value, int) and not isinstance(value, bool)


def _check_coefficient(name: str, spec, registry: dict, diagnostics: list[str]) -> None:
    specs = spec if isinstance(spec, list) else [spec]
    if not specs:
        diagnostics.append(f"coefficients.{name}: empty preset list")
    for item in specs:
        preset = item if isinstance(item, str) else (item.get("preset") if isinstance(item, dict) else None)
        if preset is None:
            diagnostics.append(f"coefficients.{name}: missing 'preset'")
        elif preset not in registry:
            diagnostics.append(f"coefficients.{name}: unknown preset '{preset}'")


def validate(raw: Any) -> list[str]:
    """
    Check a raw config without running any numerics.

    Args:
        raw: Parsed JSON object.

    Returns:
        Human-readable diagnostics; empty when the config is valid.
    """
    if not isinstance(raw, dict):
        return ["config must be a JSON object"]
    diagnostics: list[str] = []
    scenario = raw.get("scenario")
    if scenario is None:
        diagnostics.append("missing scenario")
    elif scenario not in SCENARIOS:
        diagnostics.append(f"unknown scenario '{scenario}'")
    for key in sorted(set(raw) - ALLOWED_KEYS):
        diagnostics.append(f"unknown key '{key}'")

    cfg = merged_config(raw)
    grid = cfg.get("grid")
    dim = None
    if not isinstance(grid, dict):
        diagnostics.append("grid must be an object")
    else:
        dim = grid.get("dim")
        if dim not in (2, 3):
            diagnostics.append(f"grid.dim must be 2 or 3, got {dim!r}")
        for key in ("N", "M"):
            value = grid.get(key)
            if not _is_int(value) or value < 8:
                diagnostics.append(f"grid.{key} must be an integer >= 8, got {value!r}")
        T = grid.get("T")
        if not _is_number(T) or T <= 0:
            diagnostics.append(f"grid.T must be positive, got {T!r}")
        for key in sorted(set(grid) - {"dim", "N", "M", "T"}):
            diagnostics.append(f"unknown key 'grid.{key}'")

    coefficients = cfg.get("coefficients")
    if not isinstance(coefficients, dict):
        diagnostics.append("coefficients must be an object")
    else:
        for name, spec in coefficients.items():
            if name in ("A1", "A2"):
                _check_coefficient(name, spec, A_PRESETS, diagnostics)
            elif name in ("q1", "q2"):
                _check_coefficient(name, spec, Q_PRESETS, diagnostics)
            else:
                diagnostics.append(f"unknown key 'coefficients.{name}'")

    cone = cfg.get("cone")
    if not isinstance(cone, dict):
        diagnostics.append("cone must be an object")
    else:
        omega0 = cone.get("omega0")
        if not isinstance(omega0, list) or not all(_is_number(w) for w in omega0):
            diagnostics.append("cone.omega0 must be a list of numbers")
        else:
            if dim in (2, 3) and len(omega0) != dim:
                diagnostics.append(f"inconsistent grid/cone: omega0 has {len(omega0)} entries, grid.dim is {dim}")
            if all(w == 0 for w in omega0):
                diagnostics.append("cone.omega0 must be nonzero")
        eps = cone.get("epsilon")
        if not _is_number(eps) or not 0 < eps < 0.5:
            diagnostics.append(f"cone.epsilon must lie in (0, 0.5), got {eps!r}")
        count = cone.get("count")
        if not _is_int(count) or count < 1:
            diagnostics.append(f"cone.count must be a positive integer, got {count!r}")

    lambdas = cfg.get("lambdas")
    if not isinstance(lambdas, list) or not lambdas or not all(_is_number(l) for l in lambdas):
        diagnostics.append("lambdas must be a non-empty list of numbers")
    else:
        if any(l <= 0 for l in lambdas):
            diagnostics.append("lambdas must be positive")
        if any(b <= a for a, b in zip(lambdas, lambdas[1:])):
            diagnostics.append("non-monotone sweep: lambdas must be strictly increasing")

    levels = cfg.get("levels")
    if not isinstance(levels, list) or len(levels) < 2 or not all(_is_int(n) and n >= 8 for n in levels):
        diagnostics.append("levels must list at least two integers >= 8")
    elif any(b <= a for a, b in zip(levels, levels[1:])):
        diagnostics.append("levels must be strictly increasing")

    epsilons = cfg.get("epsilons")
    if not isinstance(epsilons, list) or not epsilons or not all(_is_number(e) and 0 < e < 0.5 for e in epsilons):
        diagnostics.append("epsilons must be a non-empty list of values in (0, 0.5)")

    tolerances = cfg.get("tolerances")
    if not isinstance(tolerances, dict):
        diagnostics.append("tolerances must be an object")
    else:
        for key in sorted(set(tolerances) - set(Tolerances.names())):
            diagnostics.append(f"unknown tolerance '{key}'")
        for key, value in tolerances.items():
            if not _is_number(value) or value < 0:
                diagnostics.append(f"tolerance '{key}' must be a nonnegative number")

    padding = cfg.get("padding")
    if not _is_int(padding) or padding < 1:
        diagnostics.append(f"padding must be an integer >= 1, got {padding!r}")
    plane = cfg.get("plane_resolution")
    if plane is not None and (not _is_int(plane) or plane < 2):
        diagnostics.append(f"plane_resolution must be an integer >= 2, got {plane!r}")
    if not _is_int(cfg.get("seed")):
        diagnostics.append(f"seed must be an integer, got {cfg.get('seed')!r}")
    if not isinstance(cfg.get("output_dir"), str):
        diagnostics.append("output_dir must be a string")
    return diagnostics


@dataclass(frozen=True)
class ExperimentConfig:
    """
    A validated experiment: one scenario with every default filled in.
    """
    scenario: str
    grid: dict[str, Any]
    coefficients: dict[str, Any]
    cone: dict[str, Any]
    lambdas: list[float]
    tolerances: dict[str, float] = field(default_factory=dict)
    padding: int = 2
    plane_resolution: int | None = None
    levels: list[int] = field(default_factory=lambda: [17, 33, 65])
    epsilons: list[float] = field(default_factory=lambda: [0.05, 0.1, 0.2])
    output_dir: str = str(OUTPUT_DIR)
    seed: int = 0

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        """
        Merge ``raw`` over the scenario defaults and validate.

        Raises:
            ConfigError: If validation reports any diagnostic.
        """
        diagnostics = validate(raw)
        if diagnostics:
            raise ConfigError(diagnostics)
        return cls(**merged_config(raw))

    @classmethod
    def default(cls, scenario: str) -> "ExperimentConfig":
        return cls.from_dict({"scenario": scenario})

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    def config_hash(self) -> str:
        """SHA-256 of the canonical JSON of every field except the output directory."""
        payload = self.to_dict()
        payload.pop("output_dir")
        canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()

    def with_overrides(self, **changes) -> "ExperimentConfig":
        updated = replace(self, **{k: v for k, v in changes.items() if v is not None})
        diagnostics = validate({k: v for k, v in updated.to_dict().items()})
        if diagnostics:
            raise ConfigError(diagnostics)
        return updated

    def build_grid(self, N: int | None = None) -> SpaceTimeGrid:
        g = self.grid
        return SpaceTimeGrid(g["dim"], g["N"] if N is None else N, g["M"], g["T"])

    def tolerance_table(self) -> Tolerances:
        return DEFAULT_TOLERANCES.with_overrides(self.tolerances)
