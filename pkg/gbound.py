"""Deviation bounds between actual and reference probabilities.

For normalized pure states |A>, |R> and any 0 <= M <= 1,

    g_lower(<A|M|A>, |<A|R>|) <= <R|M|R> <= g_upper(<A|M|A>, |<A|R>|).

-g_lower and g_upper are concave in x, g_lower is nondecreasing and g_upper
nonincreasing in y.
"""
import math
import util


def _check_inputs(x, y):
    x = util.check_probability('x', x)
    y = util.check_probability('y', y)
    return x, y


def _clamp(value):
    # Floating-point dust only; the closed forms stay inside [0, 1].
    return min(max(value, 0.0), 1.0)


def _cross_term(x, y, gap):
    return 2 * y * math.sqrt(max(gap * x * (1 - x), 0.0))


def g_lower(x, y):
    x, y = _check_inputs(x, y)
    gap = 1 - y * y
    if x < gap:
        return 0.0
    return _clamp(x + gap * (1 - 2 * x) - _cross_term(x, y, gap))


def g_upper(x, y):
    x, y = _check_inputs(x, y)
    gap = 1 - y * y
    if x > y * y:
        return 1.0
    return _clamp(x + gap * (1 - 2 * x) + _cross_term(x, y, gap))
