"""Invariant measure of partition atoms, and a singularity diagnostic."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .errors import DepthExceeded
from .maps import MapSpec
from .partition import DynPartition, build_partitions
from .rotation import RotationData


def atom_invariant_measure(rot: RotationData, n: int, label_class: str) -> float:
    """mu of a long atom is |q_n rho - p_n|; of a short atom |q_{n+1} rho - p_{n+1}|.

    The conjugacy to the rotation carries P_n(x) onto the rotation's own
    partition, so these values hold for every map with rotation number rho.
    """
    kind = label_class.lower()
    if kind not in ("long", "short"):
        raise ValueError(f"label class must be long or short, got {label_class!r}")
    if n + 2 >= len(rot.convergents):
        try:
            rot.ensure_depth(n + 2)
        except DepthExceeded:
            raise
    return rot.closeness(n if kind == "long" else n + 1)


@dataclass
class AtomMeasureTable:
    level: int
    labels: list[str]
    lebesgue: np.ndarray
    invariant: np.ndarray

    @property
    def ratio(self) -> np.ndarray:
        return self.invariant / self.lebesgue

    @property
    def spread(self) -> float:
        r = self.ratio
        return float(r.max() / r.min())

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["level", "label", "lebesgue", "invariant", "ratio"])
        for lab, lam, mu in zip(self.labels, self.lebesgue, self.invariant):
            w.writerow([self.level, lab, repr(float(lam)), repr(float(mu)), repr(float(mu / lam))])
        return buf.getvalue()


def atom_measure_table(P: DynPartition) -> AtomMeasureTable:
    mu_long = atom_invariant_measure(P.rotation, P.level, "long")
    mu_short = atom_invariant_measure(P.rotation, P.level, "short")
    mu = np.array([mu_long if a.kind == "long" else mu_short for a in P.atoms])
    return AtomMeasureTable(P.level, [a.label for a in P.atoms], P.lengths, mu)


@dataclass
class SpreadSeries:
    levels: list[int]
    spread: list[float]
    degraded: list[bool]

    @property
    def increasing(self) -> bool:
        return all(b > a for a, b in zip(self.spread, self.spread[1:]))

    @property
    def nondecreasing(self) -> bool:
        return all(b >= a * (1 - 1e-12) for a, b in zip(self.spread, self.spread[1:]))


def singularity_diagnostic(fmap: MapSpec, n_range, rot: RotationData, x: float | None = None) -> SpreadSeries:
    """spread(n) = max mu/lambda over min mu/lambda across the atoms of P_n.

    The base point defaults to the first critical point, or 0 for maps
    without one.  A spread that keeps growing is the numerical trace of a
    singular invariant measure; it stays bounded for smooth conjugacies.
    """
    if x is None:
        x = fmap.critical_points[0].location if fmap.critical_points else 0.0
    levels = sorted(n_range)
    parts = build_partitions(fmap, x, levels, rot)
    spreads, flags = [], []
    for n in levels:
        t = atom_measure_table(parts[n])
        spreads.append(t.spread)
        flags.append(parts[n].degraded)
    return SpreadSeries(levels, spreads, flags)
