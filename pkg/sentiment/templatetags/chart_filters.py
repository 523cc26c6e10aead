from django import template

register = template.Library()


@register.filter
def scale(value, maximum):
    """
    Map ``value`` onto [0, 100] relative to ``maximum``.
    Returns 0 for missing or non-numeric input and when maximum is 0.
    """
    try:
        value, maximum = float(value), float(maximum)
    except (TypeError, ValueError):
        return 0
    if maximum <= 0:
        return 0
    return round(100.0 * value / maximum, 2)


@register.filter
def times(value, factor):
    try:
        return float(value) * float(factor)
    except (TypeError, ValueError):
        return 0


@register.filter
def fmt4(value):
    """Four decimals, for phi weights."""
    try:
        return f"{float(value):.4f}"
    except (TypeError, ValueError):
        return value
