import os
import warnings

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default",
    deadline=None,
    max_examples=40,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture(scope="session")
def pvc10_data():
    from ddmap.scenarios import pvc10

    return pvc10(seed=7)


@pytest.fixture(scope="session")
def pvc10_result(pvc10_data):
    from ddmap.dynamics import PipelineConfig, run_pipeline

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return run_pipeline(pvc10_data.signal, PipelineConfig.for_mode("ecg"))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
