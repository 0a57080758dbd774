"""Schwarzian derivatives of iterates and negativity scans on return intervals."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .core import CircleInterval
from .errors import AllSamplesExcluded, CoverageGap, NotRegularPoint
from .maps import REGULARITY_THRESHOLD, MapSpec, orbit
from .rotation import RotationData

SCAN_SAMPLES = 512
U_RADII = (0.25, 0.2, 0.15, 0.1, 0.05, 0.02)


def schwarzian_iterate(fmap: MapSpec, ell: int, x: float) -> float:
    """S(f^ell)(x) as sum_k Sf(f^k x) (Df^k x)^2."""
    total = 0.0
    dk = 1.0
    y = float(x) % 1.0
    for k in range(ell):
        d1 = fmap.derivative(y, 1)
        if d1 <= REGULARITY_THRESHOLD:
            raise NotRegularPoint(x, k)
        total += fmap.schwarzian(y) * dk * dk
        dk *= d1
        y, _ = fmap.step(y)
    return total


def schwarzian_terms(fmap: MapSpec, ell: int, xs):
    """Per-step summands for many points.

    Returns (terms, regular) with terms of shape (ell, len(xs)); ``regular``
    is False for points whose orbit meets the regularity threshold.
    """
    y = np.mod(np.asarray(xs, dtype=float), 1.0)
    dk = np.ones_like(y)
    regular = np.ones(y.shape, dtype=bool)
    terms = np.zeros((ell,) + y.shape)
    with np.errstate(divide="ignore", invalid="ignore"):
        for k in range(ell):
            d1 = fmap.derivative(y, 1)
            regular &= d1 > REGULARITY_THRESHOLD
            terms[k] = fmap.schwarzian(y) * dk * dk
            dk = dk * d1
            y, _ = fmap.step(y)
    terms[:, ~regular] = np.nan
    return terms, regular


def schwarzian_iterate_many(fmap: MapSpec, ell: int, xs):
    terms, regular = schwarzian_terms(fmap, ell, xs)
    return terms.sum(axis=0), regular


@dataclass
class SchwarzianScan:
    base_point: float
    level: int
    iterate: int
    interval: CircleInterval
    xs: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)
    regular: np.ndarray = field(repr=False)
    excluded_zones: list[CircleInterval] = field(default_factory=list)

    @property
    def min_value(self) -> float:
        return float(np.min(self.values[self.regular]))

    @property
    def max_value(self) -> float:
        return float(np.max(self.values[self.regular]))

    @property
    def all_negative(self) -> bool:
        return self.max_value < 0.0

    @property
    def identically_zero(self) -> bool:
        return bool(np.all(self.values[self.regular] == 0.0))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["x", "schwarzian", "regular"])
        for x, v, r in zip(self.xs, self.values, self.regular):
            w.writerow([repr(float(x)), repr(float(v)) if r else "", int(r)])
        return buf.getvalue()


def return_interval(fmap: MapSpec, x0: float, n: int, rot: RotationData, short: bool = False):
    """I_n(x0) with iterate q_{n+1}, or I_{n+1}(x0) with iterate q_n."""
    rot.ensure_depth(n + 2)
    q_self, q_ret = (rot.q[n + 1], rot.q[n]) if short else (rot.q[n], rot.q[n + 1])
    pts = orbit(fmap, x0, q_self + 1)
    diff = ((pts[q_self] - x0) + 0.5) % 1.0 - 0.5
    start = x0 if diff > 0 else pts[q_self]
    return CircleInterval.from_start_length(start, abs(diff)), q_ret


def _zones(xs, regular, length):
    """Merge runs of excluded samples into intervals."""
    zones = []
    h = length / len(xs)
    bad = np.flatnonzero(~regular)
    if bad.size == 0:
        return zones
    runs = np.split(bad, np.flatnonzero(np.diff(bad) > 1) + 1)
    for r in runs:
        zones.append(CircleInterval.from_start_length(xs[r[0]] - h / 2, h * len(r)))
    return zones


def negativity_scan(fmap: MapSpec, x0: float, n: int, rot: RotationData, short: bool = False,
                    samples: int = SCAN_SAMPLES) -> SchwarzianScan:
    """Sample S(f^q)(x) over the return interval at level n.

    The default scans I_n(x0) under f^{q_{n+1}}; ``short`` scans I_{n+1}(x0)
    under f^{q_n}.  Samples are cell midpoints, so endpoints are never used.
    """
    interval, ell = return_interval(fmap, x0, n, rot, short)
    xs = interval.start + interval.length * (np.arange(samples) + 0.5) / samples
    values, regular = schwarzian_iterate_many(fmap, ell, xs)
    if not regular.any():
        raise AllSamplesExcluded(f"every sample of {interval} meets a critical point")
    return SchwarzianScan(x0, n, ell, interval, np.mod(xs, 1.0), values, regular,
                          _zones(xs, regular, interval.length))


def first_negative_level(scans: dict[int, SchwarzianScan]) -> int | None:
    """Smallest level from which every later scanned level is strictly negative."""
    first = None
    for n in sorted(scans, reverse=True):
        if scans[n].all_negative:
            first = n
        else:
            break
    return first


# -- splitting the chain-rule sum near and away from critical points ----------


def critical_radius(fmap: MapSpec, samples: int = 2048) -> float:
    """Largest radius in U_RADII on whose punctured neighbourhoods Sf < 0."""
    crits = [c.location for c in fmap.critical_points]
    for r in U_RADII:
        ok = True
        for c in crits:
            t = np.linspace(-r, r, samples)
            t = t[np.abs(t) > 1e-6]
            with np.errstate(divide="ignore", invalid="ignore"):
                s = fmap.schwarzian(np.mod(c + t, 1.0))
            if not np.all(s < 0):
                ok = False
                break
        if ok:
            return r
    raise CoverageGap("no neighbourhood radius keeps the Schwarzian negative")


@dataclass
class SplitReport:
    sigma1: float
    sigma2: float
    radius: float
    witness: float
    u_steps: int
    v_steps: int

    @property
    def ratio(self) -> float:
        if self.sigma1 == 0.0:
            return 0.0 if self.sigma2 == 0.0 else float("inf")
        return abs(self.sigma2) / abs(self.sigma1)

    @property
    def pre_asymptotic(self) -> bool:
        return self.ratio >= 1.0


def negativity_decomposition_report(fmap: MapSpec, x0: float, n: int, rot: RotationData,
                                    radius: float | None = None) -> SplitReport:
    """Split S(f^{q_{n+1}}) at the least negative sample into the part from
    orbit intervals near critical points and the part from the rest.

    An orbit interval f^k(I_n) counts as near when it lies inside a
    ``radius`` neighbourhood of a critical point, and as far when it avoids
    the half-radius neighbourhoods.  One that does neither is a CoverageGap.
    """
    scan = negativity_scan(fmap, x0, n, rot)
    if not fmap.critical_points:
        return SplitReport(0.0, 0.0, 0.0, float(scan.xs[0]), 0, scan.iterate)
    r = radius if radius is not None else critical_radius(fmap)
    vals = np.where(scan.regular, scan.values, -np.inf)
    witness = float(scan.xs[int(np.argmax(vals))])
    terms, _ = schwarzian_terms(fmap, scan.iterate, [witness])
    terms = terms[:, 0]

    # orbit of the interval endpoints
    I = scan.interval
    ends = orbit(fmap, I.start, scan.iterate), orbit(fmap, (I.start + I.length) % 1.0, scan.iterate)
    crits = np.array([c.location for c in fmap.critical_points])
    s1 = s2 = 0.0
    nu = nv = 0
    for k in range(scan.iterate):
        a = ends[0][k]
        length = (ends[1][k] - a) % 1.0
        off = np.mod(crits - a, 1.0)
        inside = off < length
        dist = np.where(inside, 0.0, np.minimum(off - length, 1.0 - off))
        u = np.mod(a - (crits - r), 1.0)
        in_u = (u > 0) & (u + length < 2 * r)
        if np.any(in_u):
            s1 += terms[k]
            nu += 1
        elif np.all(dist >= r / 2):
            s2 += terms[k]
            nv += 1
        else:
            raise CoverageGap(f"orbit interval {k} at level {n} is neither near nor far")
    return SplitReport(float(s1), float(s2), r, witness, nu, nv)
