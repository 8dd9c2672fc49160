"""Number formatting shared by every emitted report and CSV file."""
import math

INF_MARKER = "inf"
UNDEFINED_MARKER = "undefined"


def fmt(value):
    """Format a report value; ``None`` is the undefined marker."""
    if value is None:
        return UNDEFINED_MARKER
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int,)) and not isinstance(value, bool):
        return str(value)
    if isinstance(value, str):
        return value
    value = float(value)
    if math.isinf(value):
        return INF_MARKER if value > 0 else "-" + INF_MARKER
    if math.isnan(value):
        return "nan"
    # signed zero is not meaningful in a report and would not survive parse()
    return format(value + 0.0, ".13g")


def parse(text):
    """Inverse of :func:`fmt` for numeric values and markers."""
    text = text.strip()
    if text == UNDEFINED_MARKER:
        return None
    if text in ("true", "false"):
        return text == "true"
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text
