import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", deadline=None, max_examples=50,
    suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def heralded_source():
    from epstreak.presets import heralded_source
    return heralded_source()


@pytest.fixture
def mpd():
    from epstreak.events import DETECTOR_PRESETS
    return DETECTOR_PRESETS["mpd"]


@pytest.fixture
def ideal():
    from epstreak.events import DETECTOR_PRESETS
    return DETECTOR_PRESETS["ideal"]
