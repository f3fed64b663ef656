import numpy as np
import pytest

from src import reporter_utils as ru


@pytest.mark.parametrize(
    "value,expected",
    [
        (1, 1.0),
        ("2.5", 2.5),
        (None, None),
        ("", None),
        ("abc", None),
    ],
)
def test_to_float(value, expected):
    assert ru.to_float(value) == expected


@pytest.mark.parametrize(
    "value,expected",
    [
        (None, ""),
        (0.0, "0"),
        (0.5, "0.5"),
        (1.5e-7, "1.500e-07"),
        (float("nan"), "nan"),
    ],
)
def test_format_number(value, expected):
    assert ru.format_number(value) == expected


def test_jsonable_converts_numpy_and_tuples():
    out = ru.jsonable({"a": np.float64(1.5), "b": (1, np.int64(2)), "c": np.arange(2), 3: 1j})
    assert out == {"a": 1.5, "b": [1, 2], "c": [0, 1], "3": {"re": 0.0, "im": 1.0}}
    assert type(out["b"][1]) is int


def test_check_labels_cover_columns():
    assert set(ru.CHECK_LABELS) == set(ru.CHECK_COLS)
    assert sorted(ru.ACCEPTANCE_LABELS) == list(range(1, 10))


def test_fill_template_replaces_placeholders_and_coerces_to_str():
    template = "Hello {{NAME}}. Score={{SCORE}}. Missing={{MISSING}}."
    ctx = {"NAME": "World", "SCORE": 10, "MISSING": None}
    out = ru.fill_template(template, ctx)
    assert out == "Hello World. Score=10. Missing=."


def test_status_badge_classification():
    assert "badge--good" in ru.status_badge(10, 10)
    assert "badge--mid" in ru.status_badge(5, 10)
    assert "badge--bad" in ru.status_badge(4, 10)


def test_check_dot():
    assert "dot--ok" in ru.check_dot(True)
    assert "dot--no" in ru.check_dot(False)
    assert "dot--info" in ru.check_dot(None)


def test_load_template_reads_report_templates():
    assert "{{CARDS_HTML}}" in ru.load_template("report.html")
    assert ".badge" in ru.load_template("report.css")


def test_load_template_missing_raises_oserror():
    with pytest.raises(OSError):
        ru.load_template("does-not-exist.html")
