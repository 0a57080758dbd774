import math

import pytest

from multicrit.errors import DepthExceeded
from multicrit.measure import atom_invariant_measure, atom_measure_table, singularity_diagnostic
from multicrit.partition import build_partition
from multicrit.rotation import RotationData

GAMMA = (math.sqrt(5) - 1) / 2


def test_invariant_measure_of_atoms(golden_rotation):
    _, rot = golden_rotation
    for n in range(15):
        assert atom_invariant_measure(rot, n, "long") == pytest.approx(GAMMA ** (n + 1), rel=1e-13)
        assert atom_invariant_measure(rot, n, "Short") == pytest.approx(GAMMA ** (n + 2), rel=1e-13)
    with pytest.raises(ValueError):
        atom_invariant_measure(rot, 3, "middle")


def test_measures_sum_to_one(golden_critical):
    f, rot = golden_critical
    for n in (3, 8, 12):
        t = atom_measure_table(build_partition(f, 0.0, n, rot))
        assert t.invariant.sum() == pytest.approx(1.0, abs=1e-12)
        assert len(t.to_csv().splitlines()) == len(t.labels) + 1


def test_depth_limit_without_target():
    rot = RotationData.from_float(0.3819660112501051, 10)
    with pytest.raises(DepthExceeded):
        atom_invariant_measure(rot, 20, "long")


def test_rotation_spread_is_one(golden_rotation):
    f, rot = golden_rotation
    s = singularity_diagnostic(f, range(2, 16), rot)
    assert all(v == pytest.approx(1.0, abs=1e-8) for v in s.spread)


def test_critical_spread_grows(golden_critical):
    f, rot = golden_critical
    s = singularity_diagnostic(f, range(4, 16), rot)
    assert s.increasing and s.spread[-1] > 10
    assert not any(s.degraded)


def test_diffeomorphism_spread_bounded(golden_diffeo):
    f, rot = golden_diffeo
    s = singularity_diagnostic(f, range(4, 16), rot)
    assert max(s.spread) < 2.0
    assert max(s.spread) <= 1.5 * min(s.spread)
