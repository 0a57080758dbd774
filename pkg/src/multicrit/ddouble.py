"""Double-double arithmetic.

A value is an unevaluated sum ``hi + lo`` of two binary64 numbers with
``|lo| <= ulp(hi)/2``, which carries about 32 significant digits.  The error
free transformations work elementwise on numpy arrays as well as on floats.
"""

from __future__ import annotations

import math

import numpy as np

_SPLITTER = 134217729.0  # 2**27 + 1

TWO_PI_DD = (6.283185307179586, 2.4492935982947064e-16)
HALF_PI_DD = (1.5707963267948966, 6.123233995736766e-17)


def two_sum(a, b):
    s = a + b
    bb = s - a
    err = (a - (s - bb)) + (b - bb)
    return s, err


def quick_two_sum(a, b):
    s = a + b
    return s, b - (s - a)


def split(a):
    t = _SPLITTER * a
    hi = t - (t - a)
    return hi, a - hi


def two_prod(a, b):
    p = a * b
    ah, al = split(a)
    bh, bl = split(b)
    err = ((ah * bh - p) + ah * bl + al * bh) + al * bl
    return p, err


def dd_add(x, y):
    s, e = two_sum(x[0], y[0])
    t, f = two_sum(x[1], y[1])
    e = e + t
    s, e = quick_two_sum(s, e)
    e = e + f
    return quick_two_sum(s, e)


def dd_neg(x):
    return (-x[0], -x[1])


def dd_sub(x, y):
    return dd_add(x, dd_neg(y))


def dd_add_f(x, b):
    s, e = two_sum(x[0], b)
    e = e + x[1]
    return quick_two_sum(s, e)


def dd_mul(x, y):
    p, e = two_prod(x[0], y[0])
    e = e + (x[0] * y[1] + x[1] * y[0])
    return quick_two_sum(p, e)


def dd_mul_f(x, b):
    p, e = two_prod(x[0], b)
    e = e + x[1] * b
    return quick_two_sum(p, e)


def dd_div_f(x, b):
    q1 = x[0] / b
    p, e = two_prod(q1, b)
    r = (x[0] - p - e + x[1]) / b
    return quick_two_sum(q1, r)


def dd_floor(x):
    """Floor of a double-double as a plain float integer."""
    f = np.floor(x[0])
    if np.ndim(f) == 0:
        if f == x[0]:
            return f - 1.0 if x[1] < 0 else f
        return f
    fix = (f == x[0]) & (np.asarray(x[1]) < 0)
    return np.where(fix, f - 1.0, f)


def dd_frac(x):
    """Split a double-double into (integer part, fractional part in [0,1))."""
    k = dd_floor(x)
    return k, dd_add_f(x, -k)


def to_float(x) -> float:
    return x[0] + x[1]


def _sin_cos_taylor(r):
    # |r| <= pi/4; 27 terms of each series is more than enough for 2^-106
    r2 = dd_mul(r, r)
    s = r
    term = r
    for k in range(1, 15):
        term = dd_div_f(dd_mul(term, r2), -float((2 * k) * (2 * k + 1)))
        s = dd_add(s, term)
    c = (np.ones_like(r[0]) if np.ndim(r[0]) else 1.0, 0.0 * r[0])
    term = c
    for k in range(1, 15):
        term = dd_div_f(dd_mul(term, r2), -float((2 * k - 1) * (2 * k)))
        c = dd_add(c, term)
    return s, c


def dd_sincos(x):
    """sin and cos of a double-double angle."""
    j = np.round(x[0] / HALF_PI_DD[0])
    r = dd_sub(x, dd_mul_f(HALF_PI_DD, j))
    s, c = _sin_cos_taylor(r)
    q = np.mod(j, 4)
    if np.ndim(q) == 0:
        q = int(q)
        if q == 0:
            return s, c
        if q == 1:
            return c, dd_neg(s)
        if q == 2:
            return dd_neg(s), dd_neg(c)
        return dd_neg(c), s
    sin_hi = np.select([q == 0, q == 1, q == 2], [s[0], c[0], -s[0]], -c[0])
    sin_lo = np.select([q == 0, q == 1, q == 2], [s[1], c[1], -s[1]], -c[1])
    cos_hi = np.select([q == 0, q == 1, q == 2], [c[0], -s[0], -c[0]], s[0])
    cos_lo = np.select([q == 0, q == 1, q == 2], [c[1], -s[1], -c[1]], s[1])
    return (sin_hi, sin_lo), (cos_hi, cos_lo)


def dd_sin_2pi(x):
    """sin(2*pi*x) for a double-double x, reducing x mod 1 first."""
    _, f = dd_frac(x)
    s, _ = dd_sincos(dd_mul(TWO_PI_DD, f))
    return s


def from_float(a: float):
    return (float(a), 0.0)


def isclose(x, y, rel=1e-30) -> bool:
    d = to_float(dd_sub(x, y))
    return abs(d) <= rel * max(abs(to_float(x)), abs(to_float(y)), math.ulp(0.0))
