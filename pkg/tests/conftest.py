import pytest
from hypothesis import settings

from spatialdecay import MeasurementPath

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


@pytest.fixture
def doubling_path():
    """Exact 5 dB per doubling decay at 2, 4, 8 and 16 m."""
    return MeasurementPath.from_levels([2.0, 4.0, 8.0, 16.0], [57.0, 52.0, 47.0, 42.0], id="P1")
