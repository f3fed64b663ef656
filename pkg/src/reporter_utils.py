import math

import numpy as np

from src.utils import TEMPLATE_DIR


CHECK_COLS = ["name", "passed", "value", "threshold", "detail"]

CHECK_LABELS = {
    "name": "Check",
    "passed": "Status",
    "value": "Measured",
    "threshold": "Threshold",
    "detail": "Detail",
}

ACCEPTANCE_LABELS = {
    1: "Manufactured-solution convergence",
    2: "Gauge invariance of the DN map",
    3: "Boundary Carleman estimate",
    4: "Geometric-optics remainder bound",
    5: "Remainder scaling in lambda",
    6: "Ray-transform laws",
    7: "Gauge and density recovery",
    8: "Divergence-matched full recovery",
    9: "Reproducible CSV tables",
}


def to_float(v) -> float | None:
    try:
        return float(v)
    except (ValueError, TypeError):
        return None


def format_number(v) -> str:
    """Compact scientific notation for the HTML tables; blank for missing values."""
    x = to_float(v)
    if x is None:
        return ""
    if math.isnan(x):
        return "nan"
    if x == 0 or 1e-3 <= abs(x) < 1e4:
        return f"{x:.4g}"
    return f"{x:.3e}"


def jsonable(value):
    """Recursively convert numpy scalars, arrays and tuples to plain JSON types."""
    if isinstance(value, dict):
        return {str(k): jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return jsonable(value.tolist())
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, complex):
        return {"re": value.real, "im": value.imag}
    return value


def load_template(name: str) -> str:
    """
    Load a report template from the template directory.

    Args:
        name: File name of the template.

    Returns:
        Template contents as a string.

    Raises:
        OSError: If the template file cannot be read.
    """
    path = TEMPLATE_DIR / name
    try:
        return path.read_text(encoding="utf-8")
    except OSError as exc:
        raise OSError(f"Failed to read template: {path}") from exc


def status_badge(passed: int, total: int) -> str:
    """
    Render an HTML badge with the number of passed checks.

    Args:
        passed: Number of passed checks.
        total: Number of checks.

    Returns:
        HTML string representing the badge.
    """
    if total and passed == total:
        cls = "badge badge--good"
    elif passed >= int(0.5 * total):
        cls = "badge badge--mid"
    else:
        cls = "badge badge--bad"
    return f'<span class="{cls}">{passed}/{total}</span>'


def check_dot(passed: bool | None) -> str:
    """
    Render an HTML dot for a check state; ``None`` means recorded only.
    """
    if passed is None:
        return '<span class="dot dot--info"></span>'
    return '<span class="dot dot--ok"></span>' if passed else '<span class="dot dot--no"></span>'


def fill_template(template: str, ctx: dict[str, object]) -> str:
    """
    Replace placeholders in an HTML template with provided values.

    Placeholders must be in the form ``{{KEY}}``.

    Args:
        template: Template string containing placeholders.
        ctx: Mapping of placeholder keys to replacement values.

    Returns:
        Rendered template with placeholders replaced.
    """
    for k, v in ctx.items():
        template = template.replace(f"{{{{{k}}}}}", "" if v is None else str(v))
    return template
