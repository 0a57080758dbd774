"""Trigonometric-polynomial circle maps with closed-form derivatives.

The lift is ``F(x) = x + omega + sum_j c_j sin(2 pi k_j x + phi_j)``.  Points
on the circle are kept as fractional parts; each step evaluates the lift once
and reduces mod 1, carrying the integer part separately when the caller needs
lift coordinates.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from . import ddouble as dd
from .core import normalize
from .errors import FlatOrEvenCriticality, NotHomeomorphism, NotRegularPoint

TWO_PI = 2.0 * math.pi
REGULARITY_THRESHOLD = 1e-9
INVERSE_BISECTIONS = 60


@dataclass(frozen=True)
class Term:
    amplitude: float
    frequency: int
    phase: float = 0.0

    def __post_init__(self):
        if int(self.frequency) != self.frequency or self.frequency < 1:
            raise ValueError(f"frequency must be a positive integer, got {self.frequency!r}")
        object.__setattr__(self, "frequency", int(self.frequency))
        object.__setattr__(self, "amplitude", float(self.amplitude))
        object.__setattr__(self, "phase", float(self.phase))


@dataclass(frozen=True)
class CriticalPoint:
    location: float
    criticality: float

    @property
    def order(self) -> int:
        """Criticality rounded to the nearest odd integer."""
        return int(2 * round((self.criticality - 1) / 2) + 1)


@dataclass
class MapSpec:
    omega: float
    terms: tuple[Term, ...] = ()
    critical_points: list[CriticalPoint] = field(default_factory=list)

    def __post_init__(self):
        self.omega = float(self.omega)
        self.terms = tuple(t if isinstance(t, Term) else Term(*t) for t in self.terms)
        self._c = np.array([t.amplitude for t in self.terms], dtype=float)
        self._k = np.array([t.frequency for t in self.terms], dtype=float)
        self._phi = np.array([t.phase for t in self.terms], dtype=float)
        self._scalar_terms = [(t.amplitude, TWO_PI * t.frequency, t.phase) for t in self.terms]

    # -- constructors --------------------------------------------------------

    @classmethod
    def rotation(cls, omega: float) -> "MapSpec":
        return cls(omega, ())

    @classmethod
    def arnold(cls, omega: float, coupling: float = 1.0, frequency: int = 1) -> "MapSpec":
        """``x + omega - coupling/(2 pi k) sin(2 pi k x)``; critical when coupling is 1."""
        return cls(omega, (Term(-coupling / (TWO_PI * frequency), frequency, 0.0),))

    @classmethod
    def from_dict(cls, data: dict) -> "MapSpec":
        terms = tuple(
            Term(float(t["c"]), int(t["k"]), float(t.get("phi", 0.0))) for t in data.get("terms", [])
        )
        return cls(float(data.get("omega", 0.0)), terms)

    def to_dict(self) -> dict:
        return {
            "omega": self.omega,
            "terms": [{"c": t.amplitude, "k": t.frequency, "phi": t.phase} for t in self.terms],
        }

    def with_omega(self, omega: float) -> "MapSpec":
        return MapSpec(omega, self.terms, list(self.critical_points))

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    @property
    def is_rotation(self) -> bool:
        return all(t.amplitude == 0.0 for t in self.terms)

    @property
    def d2_bound(self) -> float:
        """Upper bound for |D^2 F| from the coefficients."""
        return float(np.sum(np.abs(self._c) * (TWO_PI * self._k) ** 2))

    # -- evaluation ----------------------------------------------------------

    def _angles(self, x):
        x = np.asarray(x, dtype=float)
        return TWO_PI * self._k * x[..., None] + self._phi

    def lift(self, x):
        if np.ndim(x) == 0:
            y = x + self.omega
            for c, w, p in self._scalar_terms:
                y += c * math.sin(w * x + p)
            return y
        x = np.asarray(x, dtype=float)
        if not self.terms:
            return x + self.omega
        return x + self.omega + np.sum(self._c * np.sin(self._angles(x)), axis=-1)

    def step(self, x):
        """One iterate on the circle: returns (fractional part, integer carry)."""
        y = self.lift(x)
        if np.ndim(y) == 0:
            k = math.floor(y)
            r = y - k
            if r >= 1.0:
                r, k = 0.0, k + 1
            return r, k
        k = np.floor(y)
        r = y - k
        over = r >= 1.0
        r[over] = 0.0
        k[over] += 1
        return r, k.astype(np.int64)

    def scalar_stepper(self):
        """A plain-float step function with the terms bound as locals.

        Orbit loops spend nearly all their time here, so the common one-term
        case avoids the generic loop.
        """
        omega = self.omega
        floor = math.floor
        sin = math.sin
        terms = self._scalar_terms
        if not terms:
            def step(x):
                y = x + omega
                k = floor(y)
                return y - k, k
        elif len(terms) == 1:
            (c, w, p), = terms

            def step(x):
                y = x + omega + c * sin(w * x + p)
                k = floor(y)
                r = y - k
                if r >= 1.0:
                    return 0.0, k + 1
                return r, k
        else:
            def step(x):
                y = x + omega
                for c, w, p in terms:
                    y += c * sin(w * x + p)
                k = floor(y)
                r = y - k
                if r >= 1.0:
                    return 0.0, k + 1
                return r, k
        return step

    def derivative(self, x, order: int = 1):
        if order not in (1, 2, 3):
            raise ValueError("order must be 1, 2 or 3")
        scalar = np.ndim(x) == 0
        if not self.terms:
            out = np.full(np.shape(x), 1.0 if order == 1 else 0.0)
            return float(out) if scalar else out
        a = self._angles(x)
        w = TWO_PI * self._k
        if order == 1:
            out = 1.0 + np.sum(self._c * w * np.cos(a), axis=-1)
        elif order == 2:
            out = -np.sum(self._c * w**2 * np.sin(a), axis=-1)
        else:
            out = -np.sum(self._c * w**3 * np.cos(a), axis=-1)
        return float(out) if scalar else out

    def schwarzian(self, x):
        d1 = self.derivative(x, 1)
        d2 = self.derivative(x, 2)
        d3 = self.derivative(x, 3)
        return d3 / d1 - 1.5 * (d2 / d1) ** 2

    def lift_dd(self, x):
        """Lift evaluated in double-double arithmetic."""
        y = dd.dd_add_f(x, self.omega)
        for t in self.terms:
            ang = dd.dd_mul(dd.TWO_PI_DD, dd.dd_mul_f(dd.dd_frac(x)[1], float(t.frequency)))
            ang = dd.dd_add_f(ang, t.phase)
            s, _ = dd.dd_sincos(ang)
            y = dd.dd_add(y, dd.dd_mul_f(s, t.amplitude))
        return y


def evaluate(fmap: MapSpec, x: float, iterate_count: int) -> float:
    """f^n(x) on the circle; negative ``n`` uses the bisection inverse."""
    x = normalize(x)
    if iterate_count >= 0:
        step = fmap.scalar_stepper()
        for _ in range(iterate_count):
            x, _ = step(x)
        return x
    for _ in range(-iterate_count):
        x = inverse_step(fmap, x)
    return x


iterate = evaluate


def derivative(fmap: MapSpec, x, order: int = 1):
    return fmap.derivative(x, order)


def schwarzian(fmap: MapSpec, x):
    """Schwarzian derivative at a regular point."""
    d1 = fmap.derivative(x, 1)
    if np.ndim(d1) == 0:
        if d1 <= REGULARITY_THRESHOLD:
            raise NotRegularPoint(x)
    elif np.any(d1 <= REGULARITY_THRESHOLD):
        bad = np.asarray(x)[np.asarray(d1) <= REGULARITY_THRESHOLD]
        raise NotRegularPoint(float(bad.flat[0]))
    return fmap.schwarzian(x)


def inverse_step(fmap: MapSpec, x):
    """Preimage on the circle by bisection on the monotone lift.

    Works on scalars and arrays.  The lift satisfies F(y+1) = F(y) + 1, so
    the target ``x`` is first shifted into [F(0), F(0) + 1).
    """
    f0 = fmap.lift(0.0)
    xs = np.asarray(x, dtype=float)
    target = xs + np.ceil(f0 - xs)
    target = np.where(target >= f0 + 1.0, target - 1.0, target)
    lo = np.zeros_like(target)
    hi = np.ones_like(target)
    for _ in range(INVERSE_BISECTIONS):
        mid = 0.5 * (lo + hi)
        above = fmap.lift(mid) > target
        hi = np.where(above, mid, hi)
        lo = np.where(above, lo, mid)
    out = 0.5 * (lo + hi)
    out = np.where(out >= 1.0, 0.0, out)
    return float(out) if np.ndim(x) == 0 else out


def orbit(fmap: MapSpec, x: float, count: int, with_lift: bool = False):
    """The points f^0(x), ..., f^{count-1}(x) as fractional parts.

    With ``with_lift`` the integer carries are returned too, so that
    ``pts[i] + wraps[i]`` is F^i(x) on the lift.
    """
    pts = np.empty(count)
    wraps = np.empty(count, dtype=np.int64)
    y = normalize(x)
    w = 0
    step = fmap.scalar_stepper()
    for i in range(count):
        pts[i] = y
        wraps[i] = w
        y, k = step(y)
        w += k
    return (pts, wraps) if with_lift else pts


def orbit_many(fmap: MapSpec, xs, count: int, with_lift: bool = False):
    """Orbits of many points at once; result has shape (count, len(xs))."""
    y = np.mod(np.asarray(xs, dtype=float), 1.0)
    pts = np.empty((count,) + y.shape)
    wraps = np.zeros((count,) + y.shape, dtype=np.int64)
    w = np.zeros(y.shape, dtype=np.int64)
    for i in range(count):
        pts[i] = y
        wraps[i] = w
        y, k = fmap.step(y)
        w = w + k
    return (pts, wraps) if with_lift else pts


def lift_iterate(fmap: MapSpec, x, count: int):
    """F^count(x) on the lift, reducing mod 1 at every step to avoid drift."""
    if np.ndim(x) == 0:
        step = fmap.scalar_stepper()
        base = math.floor(x)
        y, w = x - base, 0
        for _ in range(count):
            y, k = step(y)
            w += k
        return base + w + y
    y = np.mod(np.asarray(x, dtype=float), 1.0)
    base = np.floor(np.asarray(x, dtype=float))
    w = np.zeros(y.shape, dtype=np.int64)
    for _ in range(count):
        y, k = fmap.step(y)
        w = w + k
    out = base + w + y
    return float(out) if np.ndim(x) == 0 else out


def orbit_dd(fmap: MapSpec, x: float, count: int):
    """Double-double orbit: returns (hi, lo) arrays of fractional parts."""
    hi = np.empty(count)
    lo = np.empty(count)
    y = (normalize(x), 0.0)
    for i in range(count):
        hi[i], lo[i] = y
        _, y = dd.dd_frac(fmap.lift_dd(y))
        if y[0] >= 1.0:
            y = (0.0, 0.0)
    return hi, lo


def derivative_along(fmap: MapSpec, x, k: int):
    """Df^k(x) as the product of Df along the orbit (scalar or array x)."""
    y = np.mod(np.asarray(x, dtype=float), 1.0)
    prod = np.ones(y.shape)
    for _ in range(k):
        prod = prod * fmap.derivative(y, 1)
        y, _ = fmap.step(y)
    return float(prod) if np.ndim(x) == 0 else prod


# -- validation ---------------------------------------------------------------

SAMPLES = 1 << 17
NEGATIVITY_TOL = 1e-12
CRITICAL_TOL = 1e-10


def _refine_minimum(fmap: MapSpec, a: float, b: float) -> float:
    d2a = fmap.derivative(a, 2)
    d2b = fmap.derivative(b, 2)
    if d2a < 0 < d2b:
        return brentq(lambda t: fmap.derivative(t, 2), a, b, xtol=1e-18, maxiter=200)
    res = minimize_scalar(lambda t: fmap.derivative(t, 1), bounds=(a, b), method="bounded",
                          options={"xatol": 1e-14})
    return float(res.x)


def _local_increment(fmap: MapSpec, c: float, h: float) -> float:
    """|F(c+h) - F(c)| computed without cancellation.

    Uses F(c+h) - F(c) = h + sum_j 2 c_j cos(theta_j + pi k_j h) sin(pi k_j h)
    evaluated in double-double arithmetic.
    """
    total = (h, 0.0)
    for t in fmap.terms:
        theta = dd.dd_add_f(dd.dd_mul_f(dd.TWO_PI_DD, t.frequency * c), t.phase)
        half = dd.dd_mul_f(dd.dd_div_f(dd.TWO_PI_DD, 2.0), t.frequency * h)
        s, _ = dd.dd_sincos(half)
        _, cs = dd.dd_sincos(dd.dd_add(theta, half))
        total = dd.dd_add(total, dd.dd_mul_f(dd.dd_mul(cs, s), 2.0 * t.amplitude))
    return abs(dd.to_float(total))


def estimate_criticality(fmap: MapSpec, c: float) -> float:
    """Slope of log|F(c+h) - F(c)| against log h, normally for h in [1e-6, 1e-3].

    Float coefficients only cancel DF(c) to about eps * sum|c_j| 2 pi k_j, a
    linear residue that swamps the increment of a high-order critical point
    at small h.  Scales where the increment is not well above that residue
    are dropped, moving the window up (at most to 0.05) when needed.
    """
    floor = 64 * np.finfo(float).eps * (1.0 + sum(abs(t.amplitude) * TWO_PI * t.frequency
                                                  for t in fmap.terms))
    hs = np.logspace(-6, math.log10(0.05), 61)
    vals = np.array([0.5 * (_local_increment(fmap, c, h) + _local_increment(fmap, c, -h))
                     for h in hs])
    usable = vals > 1e3 * floor * hs
    lo = hs[np.argmax(usable)] if usable.any() else hs[-1]
    sel = usable & (hs <= max(1e-3, lo * 1e3)) & (hs >= lo)
    if sel.sum() < 4:
        sel = hs >= hs[-4]
    slope = np.polyfit(np.log(hs[sel]), np.log(vals[sel]), 1)[0]
    return float(slope)


def validate_homeomorphism(fmap: MapSpec, samples: int = SAMPLES) -> list[CriticalPoint]:
    """Certify DF >= 0 and locate the critical points with their criticality.

    DF is sampled on a uniform grid.  Because |D^2 F| <= M2, DF cannot vanish
    within a grid cell whose endpoint values exceed M2*h, so only cells near
    small samples are refined.  The result is stored on ``fmap``.
    """
    h = 1.0 / samples
    grid = np.arange(samples) * h
    df = fmap.derivative(grid, 1)
    if df.min() < -NEGATIVITY_TOL:
        i = int(np.argmin(df))
        raise NotHomeomorphism(f"DF({grid[i]:.6g}) = {df[i]:.3g} < 0")
    m2 = fmap.d2_bound
    suspect = df <= m2 * h
    crit: list[CriticalPoint] = []
    if suspect.any():
        idx = np.flatnonzero(suspect)
        # group circularly contiguous indices
        groups = np.split(idx, np.flatnonzero(np.diff(idx) > 1) + 1)
        if len(groups) > 1 and groups[0][0] == 0 and groups[-1][-1] == samples - 1:
            groups[0] = np.concatenate([groups[-1] - samples, groups[0]])
            groups.pop()
        for g in groups:
            a = (g[0] - 1) * h
            b = (g[-1] + 1) * h
            x = _refine_minimum(fmap, a, b)
            dmin = fmap.derivative(x, 1)
            if dmin < -NEGATIVITY_TOL:
                raise NotHomeomorphism(f"DF({x:.6g}) = {dmin:.3g} < 0")
            if dmin > CRITICAL_TOL:
                continue
            loc = normalize(x)
            if abs(loc) < 1e-15 or abs(loc - 1.0) < 1e-15:
                loc = 0.0
            d = estimate_criticality(fmap, loc)
            nearest = 2 * round((d - 1) / 2) + 1
            if nearest < 3 or abs(d - nearest) > 0.05 * nearest or nearest > 15:
                raise FlatOrEvenCriticality(f"critical point {loc:.6g} has exponent {d:.3f}")
            crit.append(CriticalPoint(loc, d))
    crit.sort(key=lambda cp: cp.location)
    fmap.critical_points = crit
    return crit
