import pytest

from multicrit import MapSpec, RotationData, RotationTarget, tune_map

GOLDEN = RotationTarget.golden()
A30 = RotationTarget((2, 30), (1,))
A60 = RotationTarget((2, 60), (1,))


@pytest.fixture(scope="session")
def golden_critical():
    """Arnold critical map tuned to the golden mean."""
    return tune_map(MapSpec.arnold(0.6), GOLDEN)


@pytest.fixture(scope="session")
def golden_rotation():
    return MapSpec.rotation(GOLDEN.value), RotationData.from_target(GOLDEN, 60)


@pytest.fixture(scope="session")
def golden_diffeo():
    """Small-amplitude analytic diffeomorphism with golden rotation number."""
    return tune_map(MapSpec.arnold(0.6, coupling=0.3), GOLDEN)


@pytest.fixture(scope="session")
def a30_critical():
    return tune_map(MapSpec.arnold(0.46), A30)


@pytest.fixture(scope="session")
def a60_critical():
    return tune_map(MapSpec.arnold(0.46), A60)
