import math

import numpy as np
import pytest

from src.utils import DEFAULT_TOLERANCES, OUTPUT_DIR, Tolerances, observed_order, relative_error, unit_vector


def test_output_dir_exists():
    assert OUTPUT_DIR.is_dir()


def test_tolerance_defaults_match_acceptance_thresholds():
    assert DEFAULT_TOLERANCES.manufactured_order == 1.9
    assert DEFAULT_TOLERANCES.gauge == 5e-2
    assert DEFAULT_TOLERANCES.remainder_spread == 3.0
    assert DEFAULT_TOLERANCES.remainder_exponent == 0.7
    assert DEFAULT_TOLERANCES.gradient_annihilation == 1e-6
    assert DEFAULT_TOLERANCES.linearity == 1e-12
    assert DEFAULT_TOLERANCES.lstsq == 1e-10


def test_tolerance_overrides_replace_selected_fields():
    t = DEFAULT_TOLERANCES.with_overrides({"gauge": 0.1, "lstsq": 1})
    assert t.gauge == 0.1
    assert t.lstsq == 1.0
    assert t.potential == DEFAULT_TOLERANCES.potential
    assert DEFAULT_TOLERANCES.gauge == 5e-2


def test_tolerance_overrides_reject_unknown_key():
    with pytest.raises(KeyError):
        DEFAULT_TOLERANCES.with_overrides({"nope": 1.0})


def test_tolerance_names_cover_to_dict():
    assert set(Tolerances.names()) == set(DEFAULT_TOLERANCES.to_dict())


@pytest.mark.parametrize(
    "approx,exact,expected",
    [
        ([1.0, 1.0], [1.0, 1.0], 0.0),
        ([2.0, 0.0], [1.0, 0.0], 1.0),
        ([3.0, 4.0], [0.0, 0.0], 5.0),
    ],
)
def test_relative_error(approx, exact, expected):
    assert relative_error(np.array(approx), np.array(exact)) == pytest.approx(expected)


def test_observed_order_recovers_power_law():
    hs = [0.1, 0.05, 0.025]
    assert observed_order([3.0 * h**2 for h in hs], hs) == pytest.approx(2.0)


def test_observed_order_is_nan_for_zero_error():
    assert math.isnan(observed_order([1.0, 0.0], [0.1, 0.05]))


def test_unit_vector_normalizes_and_rejects_zero():
    np.testing.assert_allclose(unit_vector([3.0, 4.0]), [0.6, 0.8])
    with pytest.raises(ValueError):
        unit_vector([0.0, 0.0])
