"""
Number formatting and parsing for CSV output and console reports.
"""

import math


INF_TOKEN = "inf"
NEG_INF_TOKEN = "-inf"
NAN_TOKEN = "nan"


def format_real(value):
    """
    Format a real with 17 significant digits (round-trip exact).

    Args:
        value: float, int or None

    Returns:
        str: e.g. "0.17613000000000001", "inf", "" for None
    """
    if value is None:
        return ""
    num = float(value)
    if math.isnan(num):
        return NAN_TOKEN
    if math.isinf(num):
        return INF_TOKEN if num > 0 else NEG_INF_TOKEN
    return f"{num:.17g}"


def format_fixed(value, decimals=6):
    """Format a real with a fixed number of decimals; infinities use the CSV tokens."""
    if value is None:
        return ""
    num = float(value)
    if math.isnan(num):
        return NAN_TOKEN
    if math.isinf(num):
        return INF_TOKEN if num > 0 else NEG_INF_TOKEN
    return f"{num:.{decimals}f}"


def format_cell(value):
    """Format one CSV cell: reals at full precision, everything else as text."""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return format_real(value)
    if hasattr(value, "value") and isinstance(getattr(value, "value"), str):
        return value.value  # str enums
    try:
        return format_real(float(value))
    except (TypeError, ValueError):
        return str(value)


def parse_real(text):
    """
    Parse a real written by format_real (or by hand).

    Accepts "inf", "-inf", "nan" and the typographic minus sign U+2212.
    Raises ValueError on anything else that is not a number.
    """
    if text is None:
        raise ValueError("empty value")
    cleaned = str(text).strip().replace("−", "-")
    if not cleaned:
        raise ValueError("empty value")
    return float(cleaned)
