"""Decompositions witnessing the Katznelson non-existence criterion.

Two constructions are provided.  For rotation numbers with a large partial
quotient, a bridge of the return map is shifted along itself until the image
of its first interval is at most half as long.  For bounded type, a small
interval deep inside I_{n+1}(c_{-i}) is pushed past the critical point by
f^{q_n}, which shrinks it.  Both are checked against the four conditions of
the standing hypothesis, and the resulting constants feed an audit of the
contradiction inequality.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import CircleInterval
from .distortion import chebyshev_points, koebe_distortion_report
from .errors import (
    CombinatoricsTooBounded,
    DecompositionFailed,
    DeltaTooLarge,
    PigeonholeFailed,
)
from .maps import CriticalPoint, MapSpec, derivative_along, iterate, orbit, orbit_many
from .partition import (
    Bridge,
    build_partition,
    extract_longest_bridge,
    verify_yoccoz_scaling,
)
from .rotation import RotationData

B0_FLOOR = 2.0
B0_SLACK = 1e-6
PAIRING_TOL = 1e-9
EDGE_TOL = 1e-12


def unbounded_m_constant(K: float, C0: float) -> int:
    """ceil(sqrt(2K) * C0), with a guard against rounding just above an integer."""
    v = math.sqrt(2.0 * K) * C0
    return int(math.ceil(v - 1e-12 * max(1.0, v)))


def combinatorics_threshold_B(N: int, K: float, C0: float) -> int:
    if N < 1:
        raise ValueError("need at least one critical point")
    return 2 * (N + 1) * unbounded_m_constant(K, C0) + 1


def smallest_pigeonhole_p(N: int) -> int:
    """Smallest p with 2^p > 3N + 2."""
    p = 0
    while 2**p <= 3 * N + 2:
        p += 1
    return p


# -- shared helpers -----------------------------------------------------------


def _critical_free(fmap: MapSpec, start: float, length: float, steps: int) -> bool:
    """No critical point of f strictly inside f^j([start, start+length]) for j < steps.

    A critical point within EDGE_TOL of an endpoint counts as sitting on the
    boundary; endpoints of atoms based at c_{-i} land on c only up to rounding.
    """
    crits = np.array([c.location for c in fmap.critical_points])
    if crits.size == 0 or steps == 0:
        return True
    frac, wraps = orbit_many(fmap, np.array([start, start + length]), steps, with_lift=True)
    lens = (wraps[:, 1] - wraps[:, 0]) + (frac[:, 1] - frac[:, 0]) + (
        math.floor(start + length) - math.floor(start))
    off = np.mod(crits[None, :] - frac[:, :1], 1.0)
    return not np.any((off > EDGE_TOL) & (off < lens[:, None] - EDGE_TOL))


def _min_derivative(fmap: MapSpec, I: CircleInterval, k: int) -> float:
    xs = np.mod(chebyshev_points(I.start, I.length), 1.0)
    return float(derivative_along(fmap, xs, k).min())


def _distortion(fmap: MapSpec, I: CircleInterval, k: int) -> float:
    xs = np.mod(chebyshev_points(I.start, I.length), 1.0)
    y = xs.copy()
    logd = np.zeros_like(xs)
    for _ in range(k):
        logd += np.log(fmap.derivative(y, 1))
        y, _ = fmap.step(y)
    return float(np.exp(logd.max() - logd.min()))


# -- the standing hypothesis ----------------------------------------------------


@dataclass
class Decomposition:
    """Atom families A1, A2, A3 inside an ambient atom, with the mapping time."""

    ambient: CircleInterval
    ambient_label: str
    level: int
    A1: list[CircleInterval]
    A2: list[CircleInterval]
    A3: list[CircleInterval]
    mapping_time: int
    b0: float
    b1: float
    theta: float
    fmap: MapSpec = field(repr=False)
    constants: dict = field(default_factory=dict)

    def swapped(self) -> "Decomposition":
        """The same decomposition with A1 and A2 exchanged (for negative tests)."""
        return Decomposition(self.ambient, self.ambient_label, self.level, self.A2, self.A1,
                             self.A3, self.mapping_time, 1.0 / self.b0, self.b1, self.theta,
                             self.fmap, dict(self.constants))


@dataclass
class StandingReport:
    conditions: dict[str, bool]
    b0: float
    b1: float
    theta: float
    details: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(self.conditions.values())


def verify_standing_hypothesis(d: Decomposition, theta_min: float | None = None,
                               b0_floor: float = B0_FLOOR) -> StandingReport:
    """Re-measure conditions (i)-(iv) from the intervals alone.

    (i)   every A1 atom is at least b0_floor times every A2 atom;
    (ii)  f^k carries the j-th A1 atom onto the j-th A2 atom without meeting
          a critical point, and Df^k >= 1/b1 on it;
    (iii) A1 and A2 together cover at least theta_min of the ambient atom;
    (iv)  A1 and A2 have the same number of atoms.
    """
    f = d.fmap
    k = d.mapping_time
    conds: dict[str, bool] = {}
    details: dict = {}

    if d.A1 and d.A2:
        b0 = min(a.length for a in d.A1) / max(a.length for a in d.A2)
    else:
        b0 = 0.0
    conds["i"] = bool(b0 >= b0_floor * (1.0 - B0_SLACK))

    pair_ok = len(d.A1) == len(d.A2)
    min_deriv = math.inf
    worst_gap = 0.0
    for J1, J2 in zip(d.A1, d.A2):
        ends = np.array([J1.start, J1.start + J1.length])
        frac = orbit_many(f, ends, k + 1)[-1]
        gap_s = abs(((frac[0] - J2.start) + 0.5) % 1.0 - 0.5)
        gap_e = abs(((frac[1] - J2.end) + 0.5) % 1.0 - 0.5)
        worst_gap = max(worst_gap, gap_s, gap_e)
        if not _critical_free(f, J1.start, J1.length, k):
            pair_ok = False
        min_deriv = min(min_deriv, _min_derivative(f, J1, k))
    b1 = 1.0 / min_deriv if min_deriv > 0 else math.inf
    details["pairing_error"] = worst_gap
    details["min_derivative"] = min_deriv
    conds["ii"] = bool(pair_ok and worst_gap <= PAIRING_TOL and min_deriv > 0)
    covered = sum(a.length for a in d.A1) + sum(a.length for a in d.A2)
    theta = covered / d.ambient.length
    conds["iii"] = bool(theta >= (theta_min if theta_min is not None else 0.0) and theta > 0)
    conds["iv"] = len(d.A1) == len(d.A2)
    return StandingReport(conds, b0, b1, theta, details)


# -- unbounded combinatorics -----------------------------------------------------


def _witness_m(bridge: Bridge, max_m: int) -> int | None:
    """Smallest m such that every image f^i(J_m), i < q_{n+1}, is at most half
    of f^i(J_1)."""
    g = bridge.geometry
    i = np.arange(g.qn1)
    j1 = bridge.delta_index(1)
    base = np.array([g.length(j1, int(t)) for t in i])
    for m in range(2, max_m + 1):
        jm = bridge.delta_index(m)
        img = np.array([g.length(jm, int(t)) for t in i])
        if np.max(img / base) <= 0.5:
            return m
    return None


def calibrate_unbounded_constants(fmap: MapSpec, bridge: Bridge, m_probe: int | None = None) -> tuple[float, float]:
    """Fit the Koebe constant K and the Yoccoz spread C0 on a bridge.

    K is the measured distortion of f^{q_{n+1}(m-1)} on J_1 inside
    T = (left flank) u J_1 u J_2; C0 is the Yoccoz spread constant.
    """
    g = bridge.geometry
    fit = verify_yoccoz_scaling(bridge)
    m = m_probe or max(2, bridge.ell // 4)
    L = g.interval(bridge.j1)
    M = bridge.J[0]
    R = bridge.J[1]
    # the Delta intervals march clockwise on even levels, counterclockwise on odd ones
    first = R if bridge.level % 2 == 0 else L
    T = CircleInterval.from_start_length(first.start, L.length + M.length + R.length)
    rep = koebe_distortion_report(fmap, g.qn1 * (m - 1), M, T)
    return max(rep.ratio, 1.0 + 1e-12), max(fit.c_sigma, 1.0 + 1e-12)


def decompose_unbounded(fmap: MapSpec, c0, n: int, rot: RotationData, i: int = 0,
                        m_policy: str = "witness", constants: tuple[float, float] | None = None,
                        bridge: Bridge | None = None) -> Decomposition:
    """Decomposition of the ambient atom f^i(I_n(c0)) from a long bridge.

    J' = J_1 and J'' = J_m = (f^{q_{n+1}})^{m-1}(J_1); both are spread by f^i.
    With ``m_policy='formula'`` m is ceil(sqrt(2K) C0) from the calibrated
    constants; the default ``'witness'`` uses the smallest m for which the
    halving bound holds along the whole spread, and reports the formula
    value alongside.
    """
    if not fmap.critical_points:
        raise CombinatoricsTooBounded("map has no critical point")
    c = c0.location if isinstance(c0, CriticalPoint) else float(c0)
    bridge = bridge or extract_longest_bridge(fmap, c, n, rot)
    g = bridge.geometry
    if not 0 <= i < g.qn1:
        raise ValueError(f"ambient index {i} outside [0, {g.qn1})")
    if bridge.ell < 10:
        raise CombinatoricsTooBounded(f"bridge of length {bridge.ell} too short")
    K, C0 = constants or calibrate_unbounded_constants(fmap, bridge)
    formula_m = unbounded_m_constant(K, C0)
    N = len(fmap.critical_points)
    B = combinatorics_threshold_B(N, K, C0)
    half = bridge.ell // 2
    if m_policy == "formula":
        m = formula_m
    elif m_policy == "witness":
        m = _witness_m(bridge, half)
    else:
        raise ValueError(f"unknown m policy {m_policy!r}")
    if m is None or m >= bridge.ell / 2:
        raise CombinatoricsTooBounded(
            f"need m < l/2 = {bridge.ell / 2}, got m = {m} (a_(n+1) = {bridge.a}, B = {B})"
        )
    k = g.qn1 * (m - 1)
    Jp = g.interval(bridge.delta_index(1), i)
    Jpp = g.interval(bridge.delta_index(m), i)
    amb_s, amb_e = (i, g.qn + i) if n % 2 == 0 else (g.qn + i, i)
    ambient = CircleInterval(g.orbit[amb_s], g.orbit[amb_e])
    A3 = _complement(ambient, [Jp, Jpp])
    b0 = Jp.length / Jpp.length
    min_d = _min_derivative(fmap, Jp, k)
    theta = (Jp.length + Jpp.length) / ambient.length
    dec = Decomposition(ambient, f"L{i}", n, [Jp], [Jpp], A3, k, b0, 1.0 / min_d, theta, fmap,
                        {"K": K, "C0": C0, "m": m, "formula_m": formula_m, "B": B,
                         "ell": bridge.ell, "a": bridge.a, "i": i})
    rep = verify_standing_hypothesis(dec)
    for cond in ("i", "ii", "iv"):
        if not rep.conditions[cond]:
            raise DecompositionFailed(cond, f"at level {n}, ambient L{i}")
    return dec


def _complement(ambient: CircleInterval, pieces) -> list[CircleInterval]:
    """Gaps of ``ambient`` not covered by the (disjoint) ``pieces``."""
    offs = sorted(((ambient.offset(p.start), p.length) for p in pieces))
    gaps = []
    cursor = 0.0
    for o, length in offs:
        if o > cursor:
            gaps.append(CircleInterval.from_start_length(ambient.start + cursor, o - cursor))
        cursor = max(cursor, o + length)
    if ambient.length - cursor > 0:
        gaps.append(CircleInterval.from_start_length(ambient.start + cursor, ambient.length - cursor))
    return gaps


# -- bounded combinatorics ------------------------------------------------------


@dataclass
class BoundedWitness:
    delta_prime: CircleInterval
    delta_second: CircleInterval
    K_hat: float
    theta_hat: float
    k: int
    p: int
    i: int
    level: int
    base_point: float
    attempts: int
    k_formula: int | None = None

    @property
    def ratio(self) -> float:
        return self.delta_prime.length / self.delta_second.length


def refinement_depth_for_ratio(lam0: float, lam1: float, C: float, p: int, d0: float) -> int:
    """Smallest k with C^{-3} lam0^p lam1^{-k(d0-1)-p} >= 2."""
    need = math.log(2.0) + 3.0 * math.log(C) - p * math.log(lam0) + p * math.log(lam1)
    per_k = -(d0 - 1.0) * math.log(lam1)
    return max(0, int(math.ceil(need / per_k)))


def _interval_between(a: float, b: float, ccw_from_a: bool) -> CircleInterval:
    return CircleInterval(a, b) if ccw_from_a else CircleInterval(b, a)


def decompose_bounded(fmap: MapSpec, c, n: int, i: int, rot: RotationData,
                      k_start: int = 2, retries: int = 8,
                      decay: tuple[float, float, float] | None = None) -> BoundedWitness:
    """Intervals D' inside I_{n+1}(c_{-i}) and D'' = f^{q_n}(D') inside I_n(c_{-i}).

    Following the pigeonhole search, D' is the middle atom M of three
    consecutive atoms of P_{n+k+p}(c_{-i}) inside I_{n+k+1}(c_{-i}) whose
    union stays clear of the critical points of f^{q_n}.  k runs over even
    values (so I_{n+k+1} sits on the same side as I_{n+1}) from ``k_start``
    for up to ``retries`` extra steps.
    """
    cloc = c.location if isinstance(c, CriticalPoint) else float(c)
    N = max(1, len(fmap.critical_points))
    p = smallest_pigeonhole_p(N)
    rot.ensure_depth(n + k_start + retries + p + 3)
    qn = rot.q[n]
    if not 0 <= i < qn:
        raise ValueError(f"i must lie in [0, q_n) = [0, {qn})")
    base = iterate(fmap, cloc, -i)
    k_formula = None
    if decay is not None:
        lam0, lam1, C = decay
        d0 = min(cp.criticality for cp in fmap.critical_points) if fmap.critical_points else 3.0
        k_formula = refinement_depth_for_ratio(lam0, lam1, C, p, d0)

    pts_n = orbit(fmap, base, rot.q[n + 1] + 1)
    In = _interval_between(base, pts_n[qn], n % 2 == 0)

    attempts = 0
    k = k_start if k_start % 2 == 0 else k_start + 1
    while k <= k_start + retries:
        attempts += 1
        level = n + k + p
        P = build_partition(fmap, base, level, rot)
        inner_end = iterate(fmap, base, rot.q[n + k + 1])
        inner = _interval_between(base, inner_end, (n + k + 1) % 2 == 0)
        atoms = [a for a in P.atoms
                 if inner.offset(a.start) < inner.length
                 and inner.offset(a.start) + a.length <= inner.length * (1 + 1e-12)]
        best = None
        for L, M, R in zip(atoms, atoms[1:], atoms[2:]):
            span = L.length + M.length + R.length
            if not _critical_free(fmap, L.start, span, qn):
                continue
            Mi = M.interval
            img = orbit_many(fmap, np.array([Mi.start, Mi.start + Mi.length]), qn + 1,
                             with_lift=True)
            frac, wraps = img
            img_len = (wraps[-1, 1] - wraps[-1, 0]) + (frac[-1, 1] - frac[-1, 0]) + (
                math.floor(Mi.start + Mi.length) - math.floor(Mi.start))
            if img_len <= 0 or Mi.length < 2.0 * img_len:
                continue
            cand = (img_len, Mi, CircleInterval.from_start_length(frac[-1, 0], img_len))
            if best is None or cand[0] > best[0]:
                best = cand
        if best is not None:
            _, dp, dpp = best
            if dp.contains(dpp.start) or dpp.contains(dp.start):
                raise DecompositionFailed("i", "D' and D'' overlap")
            K_hat = _distortion(fmap, dp, qn)
            theta = dpp.length / In.length
            return BoundedWitness(dp, dpp, K_hat, theta, k, p, i, n, base, attempts, k_formula)
        k += 2
    raise PigeonholeFailed(f"no critical-free triple with halving at level {n}, i={i}")


def bounded_to_decomposition(fmap: MapSpec, w: BoundedWitness, rot: RotationData) -> Decomposition:
    """View a bounded-type witness as a one-pair decomposition of I_n(c_{-i}) u I_{n+1}(c_{-i})."""
    qn, qn1 = rot.q[w.level], rot.q[w.level + 1]
    pts = orbit(fmap, w.base_point, max(qn, qn1) + 1)
    a, b = pts[qn1], pts[qn]
    ambient = CircleInterval(a, b) if w.level % 2 == 0 else CircleInterval(b, a)
    A3 = _complement(ambient, [w.delta_prime, w.delta_second])
    min_d = _min_derivative(fmap, w.delta_prime, qn)
    theta = (w.delta_prime.length + w.delta_second.length) / ambient.length
    return Decomposition(ambient, f"I{w.level}+I{w.level + 1}", w.level, [w.delta_prime],
                         [w.delta_second], A3, qn, w.ratio, 1.0 / min_d, theta, fmap,
                         {"i": w.i, "k": w.k, "p": w.p})


# -- the contradiction inequality ---------------------------------------------------


@dataclass
class CriterionAudit:
    b0: float
    b1: float
    theta: float
    delta: float
    eta: float | None = None
    epsilon: float | None = None

    def __post_init__(self):
        if self.eta is None and self.epsilon is not None:
            self.eta = self.epsilon * (1.0 + self.b1) / self.theta
        if self.eta is None:
            self.eta = 0.0


@dataclass
class AuditResult:
    lhs: float
    contradiction_established: bool
    eta_star: float
    epsilon_star: float


def audit_lhs(b0: float, b1: float, delta: float, eta: float) -> float:
    return ((1.0 - eta) * b0 - eta * b1) / (1.0 + delta)


def audit_inequality(a: CriterionAudit) -> AuditResult:
    """Evaluate (1+delta)^{-1}[(1-eta) b0 - eta b1] and the threshold eta*.

    lhs >= 1 means the measured constants contradict the existence of an
    invariant density at this eta.  eta* = (b0 - 1 - delta)/(b0 + b1) is
    where lhs crosses 1, and epsilon* = eta* theta/(1 + b1) is the
    corresponding density level.
    """
    if not 0.0 < a.delta < 1.0 or a.b0 / (1.0 + a.delta) <= 1.0:
        raise DeltaTooLarge(f"need b0/(1+delta) > 1 with delta in (0,1); b0={a.b0}, delta={a.delta}")
    lhs = audit_lhs(a.b0, a.b1, a.delta, a.eta)
    eta_star = (a.b0 - 1.0 - a.delta) / (a.b0 + a.b1)
    eps_star = eta_star * a.theta / (1.0 + a.b1)
    return AuditResult(lhs, lhs >= 1.0, eta_star, eps_star)


def audit_table(b0: float, b1: float, theta: float, deltas, etas) -> list[dict]:
    rows = []
    for d in deltas:
        for e in etas:
            try:
                r = audit_inequality(CriterionAudit(b0, b1, theta, d, eta=e))
                rows.append({"delta": d, "eta": e, "lhs": r.lhs,
                             "established": r.contradiction_established})
            except DeltaTooLarge:
                rows.append({"delta": d, "eta": e, "lhs": float("nan"), "established": False})
    return rows
