"""Regression fixtures for constants that only have to exist.

The first run stores each measured constant under (map hash, check, level);
later runs compare against the stored value with a factor-of-two allowance.
"""

from __future__ import annotations

import json
import os
from pathlib import Path

ENV_VAR = "MULTICRIT_FIXTURES"
DEFAULT_NAME = "fixtures.json"
FACTOR = 2.0

RECORDED = "fixture-recorded"
PASS = "pass"
FAIL = "fail"


def default_path() -> Path:
    root = os.environ.get(ENV_VAR)
    base = Path(root) if root else Path.cwd() / ".multicrit"
    return base / DEFAULT_NAME


def make_key(map_hash: str, check: str, level) -> str:
    return f"{map_hash}/{check}/{level}"


def compare(value: float, fixture: float, mode: str = "within", factor: float = FACTOR) -> bool:
    """Is ``value`` consistent with ``fixture``?

    ``within``: fixture/factor <= value <= fixture*factor (positive constants);
    ``at_most``: value <= fixture*factor; ``at_least``: value >= fixture/factor.
    """
    if mode == "within":
        return fixture / factor <= value <= fixture * factor
    if mode == "at_most":
        return value <= fixture * factor
    if mode == "at_least":
        return value >= fixture / factor
    raise ValueError(f"unknown comparison mode {mode!r}")


class FixtureStore:
    def __init__(self, path: str | os.PathLike | None = None):
        self.path = Path(path) if path else default_path()
        self.data: dict[str, float] = {}
        if self.path.exists():
            self.data = json.loads(self.path.read_text())
        self._dirty = False

    def get(self, key: str):
        return self.data.get(key)

    def check(self, key: str, value: float, mode: str = "within", factor: float = FACTOR) -> str:
        """Record a first measurement, or compare against the stored one."""
        stored = self.data.get(key)
        if stored is None:
            self.data[key] = float(value)
            self._dirty = True
            return RECORDED
        return PASS if compare(float(value), stored, mode, factor) else FAIL

    def save(self) -> None:
        if not self._dirty:
            return
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self.path.write_text(json.dumps(self.data, indent=1, sort_keys=True) + "\n")
        self._dirty = False

    def reset(self) -> None:
        self.data = {}
        if self.path.exists():
            self.path.unlink()
        self._dirty = False

    def items(self):
        return sorted(self.data.items())
