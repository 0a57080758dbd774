"""Circle arithmetic on S^1 = R/Z, oriented intervals and precision policy."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DegenerateInterval, NotCompactlyContained


def normalize(x: float) -> float:
    """Reduce a lift coordinate to [0, 1).

    ``x % 1.0`` can round up to exactly 1.0 for tiny negative inputs, so that
    case is folded back to 0.
    """
    y = x - math.floor(x)
    return 0.0 if y >= 1.0 else y


@dataclass(frozen=True)
class CircleInterval:
    """Positively oriented arc from ``start`` to ``end``.

    Closed at start and open at end, so a family of consecutive intervals
    tiles the circle with no overlaps.
    """

    start: float
    end: float

    def __post_init__(self):
        s, e = normalize(self.start), normalize(self.end)
        if s == e:
            raise DegenerateInterval(f"interval [{self.start}, {self.end}] has zero length")
        object.__setattr__(self, "start", s)
        object.__setattr__(self, "end", e)

    @property
    def length(self) -> float:
        return (self.end - self.start) % 1.0

    def contains(self, p: float) -> bool:
        return (normalize(p) - self.start) % 1.0 < self.length

    def offset(self, p: float) -> float:
        """Arc distance from ``start`` to ``p`` going counterclockwise."""
        return (normalize(p) - self.start) % 1.0

    @classmethod
    def from_start_length(cls, start: float, length: float) -> "CircleInterval":
        return cls(start, start + length)


def interval_length(interval: CircleInterval) -> float:
    return interval.length


def interval_contains(interval: CircleInterval, p: float) -> bool:
    return interval.contains(p)


def gap_components(M: CircleInterval, T: CircleInterval) -> tuple[float, float]:
    """Lengths of the left and right components of T minus M."""
    left = (M.start - T.start) % 1.0
    right = T.length - left - M.length
    if left <= 0.0 or right <= 0.0 or left >= T.length:
        raise NotCompactlyContained(f"{M} is not strictly inside {T}")
    return left, right


def space_of(M: CircleInterval, T: CircleInterval) -> float:
    """Smallest of |L|/|M| and |R|/|M| for the components L, R of T minus M."""
    left, right = gap_components(M, T)
    return min(left, right) / M.length


@dataclass(frozen=True)
class PrecisionPolicy:
    """Which arithmetic to use and the shortest interval it can certify."""

    mode: str = "standard"
    min_certifiable_length: float = 1e-12

    def __post_init__(self):
        if self.mode not in ("standard", "extended"):
            raise ValueError(f"unknown precision mode {self.mode!r}")

    @classmethod
    def standard(cls) -> "PrecisionPolicy":
        return cls("standard", 1e-12)

    @classmethod
    def extended(cls) -> "PrecisionPolicy":
        return cls("extended", 1e-24)

    @classmethod
    def from_name(cls, name: str) -> "PrecisionPolicy":
        if name == "standard":
            return cls.standard()
        if name == "extended":
            return cls.extended()
        raise ValueError(f"unknown precision mode {name!r}")

    @property
    def extended_mode(self) -> bool:
        return self.mode == "extended"

    def degraded(self, length: float) -> bool:
        return length < self.min_certifiable_length
