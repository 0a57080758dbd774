"""Dynamical partitions, real bounds, critical spots and bridges."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .core import CircleInterval, PrecisionPolicy
from .errors import (
    BridgeNotFound,
    NotAlmostParabolic,
    PartitionInconsistent,
    RefinementBroken,
    TooShortForFit,
)
from .maps import CriticalPoint, MapSpec, orbit, orbit_dd
from .rotation import RotationData

TILING_TOL = 1e-10


@dataclass(frozen=True)
class Atom:
    """One atom of P_n(x), held as orbit indices of its two endpoints.

    ``head`` and ``tail`` are orbit times: the atom runs counterclockwise
    from f^head(x) to f^tail(x).  ``kind`` is "long" for images of I_n(x)
    and "short" for images of I_{n+1}(x); ``index`` is the image number.
    """

    kind: str
    index: int
    head: int
    tail: int
    start: float
    length: float
    degraded: bool = False

    @property
    def label(self) -> str:
        return f"{'L' if self.kind == 'long' else 'S'}{self.index}"

    @property
    def interval(self) -> CircleInterval:
        return CircleInterval.from_start_length(self.start, self.length)


@dataclass
class DynPartition:
    base_point: float
    level: int
    atoms: list[Atom]
    rotation: RotationData = field(repr=False)
    precision: PrecisionPolicy = field(default_factory=PrecisionPolicy.standard, repr=False)

    @property
    def lengths(self) -> np.ndarray:
        return np.array([a.length for a in self.atoms])

    @property
    def offsets(self) -> np.ndarray:
        """Counterclockwise distance of each atom start from the base point."""
        return np.mod(np.array([a.start for a in self.atoms]) - self.base_point, 1.0)

    @property
    def degraded(self) -> bool:
        return any(a.degraded for a in self.atoms)

    @property
    def min_length(self) -> float:
        return float(self.lengths.min())

    def atom_of(self, label: str) -> Atom:
        for a in self.atoms:
            if a.label == label:
                return a
        raise KeyError(label)

    def long_atoms(self) -> list[Atom]:
        return sorted((a for a in self.atoms if a.kind == "long"), key=lambda a: a.index)

    def short_atoms(self) -> list[Atom]:
        return sorted((a for a in self.atoms if a.kind == "short"), key=lambda a: a.index)

    def locate(self, p: float) -> Atom:
        off = (p - self.base_point) % 1.0
        i = int(np.searchsorted(self.offsets, off, side="right")) - 1
        return self.atoms[i]


def _orbit_offsets(fmap, x, count, precision):
    """Orbit points and their counterclockwise offsets from x."""
    if precision.extended_mode:
        hi, lo = orbit_dd(fmap, x, count)
        off_hi = hi - x
        off = np.mod(off_hi + lo, 1.0)
        # sort by (hi offset, lo) so ties in hi are broken by the low word
        order = np.lexsort((lo, np.mod(off_hi, 1.0)))
        return hi, lo, off, order
    pts = orbit(fmap, x, count)
    off = np.mod(pts - x, 1.0)
    return pts, np.zeros(count), off, np.argsort(off, kind="stable")


def _gap(hi, lo, a, b):
    """Counterclockwise length from point a to point b."""
    return float(np.mod((hi[b] - hi[a]) + (lo[b] - lo[a]), 1.0))


def build_partition(fmap: MapSpec, x: float, n: int, rot: RotationData,
                    precision: PrecisionPolicy | None = None, _orbit=None) -> DynPartition:
    """The labelled tiling P_n(x) by q_{n+1} long and q_n short atoms."""
    precision = precision or PrecisionPolicy.standard()
    rot.ensure_depth(n + 2)
    qn, qn1 = rot.q[n], rot.q[n + 1]
    count = qn + qn1
    if _orbit is None:
        hi, lo, _, order = _orbit_offsets(fmap, x, count, precision)
    else:
        hi, lo = _orbit[0][:count], _orbit[1][:count]
        off_hi = np.mod(hi - x, 1.0)
        order = np.lexsort((lo, off_hi)) if precision.extended_mode else np.argsort(off_hi, kind="stable")
    even = n % 2 == 0
    atoms: list[Atom] = []
    nxt = np.roll(order, -1)
    for ia, ib in zip(order.tolist(), nxt.tolist()):
        diff = ib - ia
        if even and diff == qn:
            kind, idx = "long", ia
        elif even and diff == -qn1:
            kind, idx = "short", ib
        elif not even and diff == -qn:
            kind, idx = "long", ib
        elif not even and diff == qn1:
            kind, idx = "short", ia
        else:
            raise PartitionInconsistent(
                f"level {n}: neighbouring orbit points {ia} and {ib} do not bound an atom"
            )
        length = _gap(hi, lo, ia, ib)
        atoms.append(Atom(kind, idx, ia, ib, float(hi[ia]), length,
                          precision.degraded(length)))
    n_long = sum(a.kind == "long" for a in atoms)
    if n_long != qn1 or len(atoms) - n_long != qn:
        raise PartitionInconsistent(f"level {n}: {n_long} long atoms, expected {qn1}")
    total = sum(a.length for a in atoms)
    if abs(total - 1.0) > TILING_TOL:
        raise PartitionInconsistent(f"level {n}: atom lengths sum to {total!r}")
    return DynPartition(x, n, atoms, rot, precision)


def build_partitions(fmap: MapSpec, x: float, levels, rot: RotationData,
                     precision: PrecisionPolicy | None = None) -> dict[int, DynPartition]:
    """Several levels from one shared orbit, so nesting is exact by construction."""
    precision = precision or PrecisionPolicy.standard()
    levels = sorted(levels)
    rot.ensure_depth(levels[-1] + 2)
    count = rot.q[levels[-1]] + rot.q[levels[-1] + 1]
    hi, lo, _, _ = _orbit_offsets(fmap, x, count, precision)
    return {n: build_partition(fmap, x, n, rot, precision, _orbit=(hi, lo)) for n in levels}


def certified_levels(fmap: MapSpec, x: float, rot: RotationData, start: int, stop: int,
                     precision: PrecisionPolicy | None = None) -> dict[int, DynPartition]:
    """Levels start..stop-1, truncated before the first precision-degraded one."""
    parts = build_partitions(fmap, x, range(start, stop), rot, precision)
    out = {}
    for n in sorted(parts):
        if parts[n].degraded:
            break
        out[n] = parts[n]
    return out


def check_tiling(P: DynPartition, tol: float = TILING_TOL) -> bool:
    if abs(P.lengths.sum() - 1.0) > tol:
        return False
    offs = P.offsets
    ends = offs + P.lengths
    return bool(np.all(np.abs(ends[:-1] - offs[1:]) <= tol) and abs(ends[-1] - 1.0) <= tol)


def nesting_map(coarse: DynPartition, fine: DynPartition) -> np.ndarray:
    """Index of the coarse atom that contains each fine atom.

    Raises RefinementBroken when a fine atom straddles a coarse endpoint.
    Endpoints are compared as orbit times, so the check is exact.
    """
    if coarse.base_point != fine.base_point:
        raise RefinementBroken("partitions have different base points")
    starts = {a.head: i for i, a in enumerate(coarse.atoms)}
    parent = np.empty(len(fine.atoms), dtype=int)
    current = -1
    for j, atom in enumerate(fine.atoms):
        if atom.head in starts:
            current = starts[atom.head]
        if current < 0:
            raise RefinementBroken("first fine atom does not start at a coarse endpoint")
        parent[j] = current
        if atom.tail in starts and starts[atom.tail] not in (current, (current + 1) % len(coarse.atoms)):
            raise RefinementBroken(f"fine atom {atom.label} crosses coarse atoms")
    # every coarse atom must end where one of its children ends
    for i, a in enumerate(coarse.atoms):
        kids = np.flatnonzero(parent == i)
        if len(kids) == 0 or fine.atoms[kids[-1]].tail != a.tail:
            raise RefinementBroken(f"coarse atom {a.label} is not a union of fine atoms")
    return parent


def adjacency_ratio_report(P: DynPartition) -> tuple[float, tuple[str, str]]:
    """Largest length ratio between neighbouring atoms, with the witness pair."""
    L = P.lengths
    R = np.roll(L, -1)
    ratios = np.maximum(L / R, R / L)
    i = int(np.argmax(ratios))
    j = (i + 1) % len(L)
    return float(ratios[i]), (P.atoms[i].label, P.atoms[j].label)


def refinement_ratios(Pn: DynPartition, Pnk: DynPartition) -> np.ndarray:
    """|J|/|I| for each atom J of the finer partition inside atom I of the coarser.

    Parents that the finer level leaves unsplit are skipped, since their only
    child is the parent itself.
    """
    if Pn.level == Pnk.level:
        return np.ones(len(Pn.atoms))
    parent = nesting_map(Pn, Pnk)
    counts = np.bincount(parent, minlength=len(Pn.atoms))
    Lp = Pn.lengths[parent]
    Lc = Pnk.lengths
    keep = counts[parent] > 1
    return Lc[keep] / Lp[keep]


def refinement_decay_report(Pn: DynPartition, Pnk: DynPartition) -> tuple[float, float]:
    r = refinement_ratios(Pn, Pnk)
    return float(r.min()), float(r.max())


def fit_decay_rates(parts: dict[int, DynPartition], n: int, ks) -> tuple[float, float, float]:
    """Fit min ratio ~ C0^{-1} lam0^k and max ratio ~ C0 lam1^k.

    Returns (lam0, lam1, C0) where C0 is the smallest constant making both
    bounds hold at every supplied k.
    """
    ks = np.array(sorted(ks), dtype=float)
    mins, maxs = [], []
    for k in ks:
        lo, hi = refinement_decay_report(parts[n], parts[n + int(k)])
        mins.append(lo)
        maxs.append(hi)
    mins, maxs = np.log(mins), np.log(maxs)
    lam0 = float(np.exp(np.polyfit(ks, mins, 1)[0]))
    lam1 = float(np.exp(np.polyfit(ks, maxs, 1)[0]))
    c_hi = np.max(maxs - ks * np.log(lam1))
    c_lo = np.max(ks * np.log(lam0) - mins)
    return lam0, lam1, float(np.exp(max(c_hi, c_lo, 0.0)))


def partition_csv(parts) -> str:
    """Atom table with columns level, label, start, length, flags."""
    if isinstance(parts, DynPartition):
        parts = [parts]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["level", "label", "start", "length", "flags"])
    for P in parts:
        for a in P.atoms:
            w.writerow([P.level, a.label, repr(a.start), repr(a.length),
                        "precision-degraded" if a.degraded else ""])
    return buf.getvalue()


# -- critical spots and bridges -------------------------------------------------


@dataclass
class SpotGeometry:
    """Endpoints of the intervals Delta_k = f^{q_n + k q_{n+1}}(I_{n+1}(c0)).

    ``orbit`` holds f^t(c0) for t up to q_n + (a_{n+1}+1) q_{n+1}, so the
    forward images of every Delta_k are available by index arithmetic.
    """

    n: int
    a: int
    qn: int
    qn1: int
    orbit: np.ndarray

    def ends(self, k: int, i: int = 0) -> tuple[int, int]:
        """Orbit times of the counterclockwise start and end of f^i(Delta_k)."""
        near = self.qn + k * self.qn1 + i
        far = near + self.qn1
        # f^{q_{n+1}} moves points toward c0; on an even level that is clockwise
        return (far, near) if self.n % 2 == 0 else (near, far)

    def interval(self, k: int, i: int = 0) -> CircleInterval:
        s, e = self.ends(k, i)
        return CircleInterval(self.orbit[s], self.orbit[e])

    def length(self, k: int, i: int = 0) -> float:
        s, e = self.ends(k, i)
        return float((self.orbit[e] - self.orbit[s]) % 1.0)


def spot_geometry(fmap: MapSpec, c0: float, n: int, rot: RotationData) -> SpotGeometry:
    rot.ensure_depth(n + 3)
    a = rot.a(n + 1)
    qn, qn1 = rot.q[n], rot.q[n + 1]
    pts = orbit(fmap, c0, qn + (a + 1) * qn1 + qn1)
    return SpotGeometry(n, a, qn, qn1, pts)


def _crit_location(c) -> float:
    return c.location if isinstance(c, CriticalPoint) else float(c)


def find_critical_spots(fmap: MapSpec, c0, n: int, rot: RotationData,
                        geometry: SpotGeometry | None = None) -> list[int]:
    """k in [0, a_{n+1}) such that some f^i(Delta_k), i < q_{n+1}, holds a
    critical point of f."""
    g = geometry or spot_geometry(fmap, _crit_location(c0), n, rot)
    crits = np.array([cp.location for cp in fmap.critical_points])
    if crits.size == 0:
        return []
    spots = []
    i = np.arange(g.qn1)
    for k in range(g.a):
        s, e = g.ends(k)
        start = g.orbit[s + i]
        length = np.mod(g.orbit[e + i] - start, 1.0)
        inside = np.mod(crits[None, :] - start[:, None], 1.0) < length[:, None]
        if inside.any():
            spots.append(k)
    return spots


def spot_comparability(fmap: MapSpec, c0, n: int, rot: RotationData, spots=None,
                       geometry: SpotGeometry | None = None) -> float:
    """min over spots and i <= q_{n+1} of |f^i(spot)| / |f^i(I_n(c0))|.

    Returns 1.0 when there are no spots.
    """
    g = geometry or spot_geometry(fmap, _crit_location(c0), n, rot)
    spots = find_critical_spots(fmap, c0, n, rot, g) if spots is None else spots
    if not spots:
        return 1.0
    # I_n(c0) has endpoints at orbit times 0 and q_n
    worst = np.inf
    for k in spots:
        for i in range(g.qn1 + 1):
            s, e = g.ends(k, i)
            spot_len = (g.orbit[e] - g.orbit[s]) % 1.0
            amb = abs(((g.orbit[g.qn + i] - g.orbit[i]) + 0.5) % 1.0 - 0.5)
            worst = min(worst, spot_len / amb)
    return float(worst)


@dataclass
class Bridge:
    level: int
    j1: int
    j2: int
    J: list[CircleInterval]
    lengths: np.ndarray
    flanks: tuple[CircleInterval, CircleInterval]
    spots: list[int]
    a: int
    n_critical: int
    geometry: SpotGeometry = field(repr=False)

    @property
    def ell(self) -> int:
        return len(self.J)

    @property
    def total(self) -> float:
        return float(self.lengths.sum())

    @property
    def sigma(self) -> float:
        return float(min(self.lengths[0], self.lengths[-1]) / self.total)

    @property
    def meets_bound(self) -> bool:
        """Whether the run is at least a_{n+1}/(N+1) long."""
        return self.ell >= self.a / (self.n_critical + 1)

    def delta_index(self, k: int) -> int:
        """Index of J_k (1-based) among the Delta intervals."""
        return self.j1 + k


def extract_longest_bridge(fmap: MapSpec, c0, n: int, rot: RotationData) -> Bridge:
    """Longest run of Delta intervals strictly between two critical spots.

    The first and last Delta of I_n(c0) always serve as flanks, so with no
    spots the run is Delta_1 .. Delta_{a-2}.
    """
    c = _crit_location(c0)
    g = spot_geometry(fmap, c, n, rot)
    spots = find_critical_spots(fmap, c0, n, rot, g)
    marks = sorted(set(spots) | {0, g.a - 1})
    best = None
    for j1, j2 in zip(marks, marks[1:]):
        if best is None or j2 - j1 > best[1] - best[0]:
            best = (j1, j2)
    if best is None or best[1] - best[0] - 1 < 1:
        raise BridgeNotFound(f"level {n}: a_(n+1) = {g.a} leaves no bridge")
    j1, j2 = best
    J = [g.interval(k) for k in range(j1 + 1, j2)]
    lengths = np.array([g.length(k) for k in range(j1 + 1, j2)])
    flanks = (g.interval(j1), g.interval(j2))
    return Bridge(n, j1, j2, J, lengths, flanks, spots, g.a, max(1, len(fmap.critical_points)), g)


@dataclass
class YoccozFit:
    slope: float
    c_sigma: float
    ell: int
    sigma: float
    rows: list[tuple[int, float, int]]


def verify_yoccoz_scaling(bridge: Bridge) -> YoccozFit:
    """Regress log|J_k| on log min(k, l-k) and measure the spread constant."""
    ell = bridge.ell
    L = bridge.lengths
    if np.ptp(L) <= 1e-9 * L.max():
        raise NotAlmostParabolic("bridge intervals have constant length")
    if ell < 10:
        raise TooShortForFit(f"bridge of length {ell} < 10")
    k = np.arange(1, ell + 1)
    mk = np.minimum(k, ell - k)
    sel = (k >= 2) & (k <= ell - 2)
    slope = float(np.polyfit(np.log(mk[sel]), np.log(L[sel]), 1)[0])
    inner = mk > 0
    r = L[inner] / (bridge.total / mk[inner] ** 2)
    c_sigma = float(max(r.max(), 1.0 / r.min()))
    rows = [(int(kk), float(l), int(m)) for kk, l, m in zip(k, L, mk) if m > 0]
    return YoccozFit(slope, c_sigma, ell, bridge.sigma, rows)
