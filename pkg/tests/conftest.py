import mpmath
import pytest

mpmath.mp.dps = 50


@pytest.fixture
def operating_point():
    """Reference operating point: mu = 1.65, alpha = 0.21."""
    return {"mu": 1.65, "alpha": 0.21}
