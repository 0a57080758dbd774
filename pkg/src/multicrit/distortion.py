"""Cross-ratios and their distortion, Koebe distortion, C^1 bounds, and the
symmetric return comparison."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import CircleInterval, gap_components, space_of
from .errors import (
    ChainRuleMismatch,
    IterateNotInjectiveOnT,
    MultiplicityExceeded,
    NotDiffeomorphicOnT,
)
from .maps import MapSpec, inverse_step, orbit, orbit_many
from .rotation import RotationData

SAMPLES = 256
CHAIN_RULE_RTOL = 1e-10


def chebyshev_points(a: float, length: float, count: int = SAMPLES) -> np.ndarray:
    """Chebyshev-spaced points in [a, a+length] plus both endpoints (lift coordinates)."""
    j = np.arange(count)
    t = 0.5 * (1.0 - np.cos(np.pi * (j + 0.5) / count))
    return a + length * np.concatenate(([0.0], t, [1.0]))


@dataclass(frozen=True)
class CrossRatioPair:
    M: CircleInterval
    T: CircleInterval

    def __post_init__(self):
        gap_components(self.M, self.T)

    @property
    def components(self) -> tuple[float, float, float]:
        left, right = gap_components(self.M, self.T)
        return left, self.M.length, right

    @classmethod
    def from_lengths(cls, start: float, left: float, middle: float, right: float) -> "CrossRatioPair":
        return cls(CircleInterval.from_start_length(start + left, middle),
                   CircleInterval.from_start_length(start, left + middle + right))


def _cr(left, mid, right):
    return left * right / ((left + mid) * (right + mid))


def cross_ratio(pair: CrossRatioPair) -> float:
    return _cr(*pair.components)


def _lift_points(pair: CrossRatioPair) -> np.ndarray:
    left, mid, right = pair.components
    t0 = pair.T.start
    return np.array([t0, t0 + left, t0 + left + mid, t0 + left + mid + right])


def _track(fmap: MapSpec, pts: np.ndarray, steps: int):
    """Lift images of ``pts`` under F^0..F^steps, reduced mod 1 step by step.

    Returns gaps[i] = consecutive differences of the images at time i,
    shape (steps+1, len(pts)-1).
    """
    frac, wraps = orbit_many(fmap, pts, steps + 1, with_lift=True)
    base = np.floor(pts)
    lifts_w = wraps + base
    gaps = (lifts_w[:, 1:] - lifts_w[:, :-1]) + (frac[:, 1:] - frac[:, :-1])
    span = (lifts_w[:, -1] - lifts_w[:, 0]) + (frac[:, -1] - frac[:, 0])
    return gaps, span


def cross_ratio_distortion(fmap: MapSpec, j: int, pair: CrossRatioPair) -> float:
    """[f^j(M), f^j(T)] / [M, T], checked against the product of one-step factors."""
    if j == 0:
        return 1.0
    gaps, span = _track(fmap, _lift_points(pair), j)
    if np.any(span >= 1.0) or np.any(gaps <= 0.0):
        raise IterateNotInjectiveOnT(f"f^{j} does not act injectively on {pair.T}")
    crs = _cr(gaps[:, 0], gaps[:, 1], gaps[:, 2])
    direct = crs[-1] / crs[0]
    chained = float(np.prod(crs[1:] / crs[:-1]))
    if abs(chained - direct) > CHAIN_RULE_RTOL * abs(direct):
        raise ChainRuleMismatch(f"direct {direct!r} vs chained {chained!r}")
    return float(direct)


def one_step_factors(fmap: MapSpec, pair: CrossRatioPair, j: int) -> np.ndarray:
    """CrD(f; f^i M, f^i T) for i < j."""
    gaps, _ = _track(fmap, _lift_points(pair), j)
    crs = _cr(gaps[:, 0], gaps[:, 1], gaps[:, 2])
    return crs[1:] / crs[:-1]


def intersection_multiplicity(intervals) -> int:
    """Largest number of the given arcs containing a common point."""
    events = []
    depth = 0
    for I in intervals:
        s, e = I.start, I.start + I.length
        if e > 1.0:
            depth += 1  # covers 0
            e -= 1.0
        events.append((s, 1))
        events.append((e, -1))
    # at equal positions close before opening (arcs are half open)
    events.sort(key=lambda ev: (ev[0], ev[1]))
    best = depth
    for _, d in events:
        depth += d
        best = max(best, depth)
    return best


def verify_cross_ratio_inequality(fmap: MapSpec, pairs, multiplicity: int) -> tuple[float, float]:
    """Product of one-step cross-ratio distortions over a family, and its m-th root."""
    pairs = list(pairs)
    measured = intersection_multiplicity([p.T for p in pairs])
    if measured > multiplicity:
        raise MultiplicityExceeded(measured, multiplicity)
    log_prod = 0.0
    for p in pairs:
        log_prod += math.log(cross_ratio_distortion(fmap, 1, p))
    product = math.exp(log_prod)
    return product, product ** (1.0 / multiplicity)


def orbit_family(fmap: MapSpec, c0: float, n: int, rot: RotationData) -> list[CrossRatioPair]:
    """Pairs (f^i(M), f^i(T)) for i < q_{n+1}, with M = I_n(c0) and
    T = I_{n+1}(c0) u I_n(c0) u f^{q_n}(I_n(c0)).

    The union covers any point at most three times.
    """
    rot.ensure_depth(n + 2)
    qn, qn1 = rot.q[n], rot.q[n + 1]
    pts = orbit(fmap, c0, qn1 + 2 * qn + 1)
    pairs = []
    for i in range(qn1):
        a, b, c, d = pts[qn1 + i], pts[i], pts[qn + i], pts[2 * qn + i]
        if n % 2 == 1:
            a, b, c, d = d, c, b, a
        left = (b - a) % 1.0
        mid = (c - b) % 1.0
        right = (d - c) % 1.0
        pairs.append(CrossRatioPair.from_lengths(a, left, mid, right))
    return pairs


# -- Koebe ----------------------------------------------------------------------


@dataclass
class KoebeReport:
    ratio: float
    tau: float
    ell: float
    c0_fit: float

    def bound(self, c0: float) -> float:
        return koebe_bound(self.tau, self.ell, c0)


def koebe_bound(tau: float, ell: float, c0: float) -> float:
    return (1.0 + 1.0 / tau) ** 2 * math.exp(c0 * ell)


def _image_lengths(fmap: MapSpec, start: float, length: float, k: int):
    """|f^i([start, start+length])| for i = 0..k, plus the images as intervals."""
    frac, wraps = orbit_many(fmap, np.array([start, start + length]), k + 1, with_lift=True)
    lens = (wraps[:, 1] - wraps[:, 0]) + (frac[:, 1] - frac[:, 0]) + math.floor(start + length) - math.floor(start)
    return frac[:, 0], lens


def _critical_inside(fmap: MapSpec, starts, lens) -> bool:
    crits = np.array([c.location for c in fmap.critical_points])
    if crits.size == 0:
        return False
    off = np.mod(crits[None, :] - np.asarray(starts)[:, None], 1.0)
    return bool(np.any((off > 0) & (off < np.asarray(lens)[:, None])))


def koebe_distortion_report(fmap: MapSpec, k: int, M: CircleInterval, T: CircleInterval) -> KoebeReport:
    """Largest ratio Df^k(x)/Df^k(y) over sampled x, y in M, with the inputs of
    the Koebe bound (1 + 1/tau)^2 exp(C0 * ell)."""
    left, _ = gap_components(M, T)
    if k == 0:
        return KoebeReport(1.0, space_of(M, T), 0.0, 0.0)
    t_starts, t_lens = _image_lengths(fmap, T.start, T.length, k)
    if np.any(t_lens >= 1.0) or np.any(t_lens <= 0.0):
        raise NotDiffeomorphicOnT("iterate wraps T around the circle")
    if _critical_inside(fmap, t_starts[:k], t_lens[:k]):
        raise NotDiffeomorphicOnT(f"a critical point lies in f^i(T) for some i < {k}")
    ell = float(t_lens[:k].sum())
    xs = chebyshev_points(T.start + left, M.length)
    y = np.mod(xs, 1.0)
    logd = np.zeros(xs.shape)
    for _ in range(k):
        logd += np.log(fmap.derivative(y, 1))
        y, _ = fmap.step(y)
    ratio = float(np.exp(logd.max() - logd.min()))
    m_starts, m_lens = _image_lengths(fmap, T.start + left, M.length, k)
    Mk = CircleInterval.from_start_length(m_starts[k], m_lens[k])
    Tk = CircleInterval.from_start_length(t_starts[k], t_lens[k])
    tau = space_of(Mk, Tk)
    c0 = max(0.0, math.log(ratio / (1.0 + 1.0 / tau) ** 2) / ell) if ell > 0 else 0.0
    return KoebeReport(ratio, tau, ell, c0)


# -- C^1 bounds and symmetric returns -------------------------------------------


@dataclass
class C1Report:
    k_hat: float
    sup_norm: float
    interval_length: float


def c1_bounds_check(fmap: MapSpec, x0: float, n: int, rot: RotationData, short: bool = False) -> C1Report:
    """Df^k(x) |I| / |f^k(I)| over sampled x in I and k up to the return time.

    With ``short`` the interval is I_{n+1}(x0) and k runs to q_n, otherwise
    I_n(x0) with k up to q_{n+1}.
    """
    rot.ensure_depth(n + 2)
    q_self, q_ret = (rot.q[n + 1], rot.q[n]) if short else (rot.q[n], rot.q[n + 1])
    pts = orbit(fmap, x0, q_self + q_ret + 1)
    # I runs from x0 to f^{q_self}(x0); orient counterclockwise
    diff = ((pts[q_self] - pts[0]) + 0.5) % 1.0 - 0.5
    start = x0 if diff > 0 else pts[q_self]
    length = abs(diff)
    xs = np.mod(chebyshev_points(start, length), 1.0)
    y = xs.copy()
    deriv = np.ones_like(xs)
    k_hat = 1.0
    for k in range(q_ret + 1):
        img = abs(((pts[q_self + k] - pts[k]) + 0.5) % 1.0 - 0.5)
        k_hat = max(k_hat, float(deriv.max()) * length / img)
        if k < q_ret:
            deriv = deriv * fmap.derivative(y, 1)
            y, _ = fmap.step(y)
    return C1Report(k_hat, float(deriv.max()), length)


def symmetric_return_check(fmap: MapSpec, x, n: int, rot: RotationData):
    """|f^{q_n}(x) - x| / |x - f^{-q_n}(x)|, for a point or an array of points."""
    rot.ensure_depth(n + 1)
    qn = rot.q[n]
    xs = np.mod(np.asarray(x, dtype=float), 1.0)
    fwd = xs.copy()
    back = xs.copy()
    for _ in range(qn):
        fwd, _ = fmap.step(fwd)
        back = inverse_step(fmap, back)
    a = np.abs((fwd - xs + 0.5) % 1.0 - 0.5)
    b = np.abs((xs - back + 0.5) % 1.0 - 0.5)
    r = a / b
    return float(r) if np.ndim(x) == 0 else r
