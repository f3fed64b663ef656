from __future__ import annotations

from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

import numpy as np

PROJECT_DIR = Path(__file__).parent.parent
TEMPLATE_DIR = PROJECT_DIR / "templates"
CONFIG_DIR = PROJECT_DIR / "configs"
OUTPUT_DIR = PROJECT_DIR / "output"

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG_ERROR = 2

OUTPUT_DIR.mkdir(parents=True, exist_ok=True)


@dataclass(frozen=True)
class Tolerances:
    """
    Default thresholds used by the checks of every scenario.

    A scenario config may override any field through its ``tolerances``
    mapping; unknown keys are rejected by config validation.
    """
    solver_residual: float = 1e-10
    zero_solution: float = 1e-12
    q_tilde: float = 1e-12
    max_principle_factor: float = 10.0
    manufactured_order: float = 1.9
    fine_grid: float = 2e-2
    gauge: float = 5e-2
    gauge_order: float = 1.0
    adjoint_pairing: float = 5e-2
    transport_residual: float = 1e-3
    transport_order: float = 1.5
    go_residual: float = 1e-2
    go_exact: float = 1e-8
    remainder_spread: float = 3.0
    residual_growth: float = 1.25
    split_sum: float = 1e-10
    p2_slack_factor: float = 10.0
    carleman_growth: float = 0.5
    carleman_constant: float = 1e3
    ibp_identity: float = 5e-2
    remainder_exponent: float = 0.7
    gradient_annihilation: float = 1e-6
    gradient_annihilation_factor: float = 10.0
    linearity: float = 1e-12
    lstsq: float = 1e-10
    curl_recovery: float = 5e-2
    gradient_curl: float = 1e-2
    curl_relative: float = 1e-3
    potential_boundary: float = 1e-3
    potential: float = 5e-2
    harmonic_factor: float = 1.0
    certificate_constant: float = 10.0
    corollary: float = 5e-2
    q_recovery: float = 5e-2
    q_mode: float = 1e-10
    attenuation_roundtrip: float = 1e-10
    attenuation_taylor: float = 1e-9
    shift_covariance: float = 1e-10

    @classmethod
    def names(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    def with_overrides(self, overrides: dict[str, float] | None) -> "Tolerances":
        """
        Return a copy with selected thresholds replaced.

        Args:
            overrides: Mapping of tolerance names to new values.

        Returns:
            New `Tolerances` instance.

        Raises:
            KeyError: If a key does not name a tolerance.
        """
        if not overrides:
            return self
        unknown = sorted(set(overrides) - set(self.names()))
        if unknown:
            raise KeyError(f"Unknown tolerance keys: {unknown}")
        return replace(self, **{k: float(v) for k, v in overrides.items()})

    def to_dict(self) -> dict[str, float]:
        return asdict(self)


DEFAULT_TOLERANCES = Tolerances()


def relative_error(approx: np.ndarray, exact: np.ndarray) -> float:
    """
    Relative discrete l2 distance between two arrays.

    Returns the absolute distance when ``exact`` is identically zero.
    """
    diff = np.linalg.norm(np.ravel(approx) - np.ravel(exact))
    scale = np.linalg.norm(np.ravel(exact))
    return float(diff / scale) if scale > 0 else float(diff)


def observed_order(errors: list[float], spacings: list[float]) -> float:
    """
    Least-squares slope of log(error) against log(spacing).

    Args:
        errors: Error measured on each refinement level.
        spacings: Mesh spacing of each level.

    Returns:
        The fitted convergence order; ``nan`` when an error is zero.
    """
    errs = np.asarray(errors, dtype=float)
    hs = np.asarray(spacings, dtype=float)
    if np.any(errs <= 0):
        return float("nan")
    slope, _ = np.polyfit(np.log(hs), np.log(errs), 1)
    return float(slope)


def unit_vector(v) -> np.ndarray:
    """Normalize ``v``; raises ValueError for the zero vector."""
    arr = np.asarray(v, dtype=float)
    norm = np.linalg.norm(arr)
    if norm == 0:
        raise ValueError("Direction must be a nonzero vector")
    return arr / norm
