import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

PI_MAIN = ((0.7, 0.3), (0.4, 0.6))


@pytest.fixture
def pi_main():
    return np.array(PI_MAIN)
