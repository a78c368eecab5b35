# tests/conftest.py

# Standard Imports
import os

# External Imports
import numpy as np
import pytest
from hypothesis import HealthCheck, settings

# Local Imports
from utils.model import TrackingModel, TrackingModelParams, default_hmm

settings.register_profile('default', max_examples=50, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture])
settings.register_profile('ci', max_examples=200, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture])
settings.load_profile(os.environ.get('HYPOTHESIS_PROFILE', 'default'))


def pytest_addoption(parser):
    parser.addoption('--runslow', action='store_true', default=False, help='run desk-scale acceptance tests')


def pytest_collection_modifyitems(config, items):
    if config.getoption('--runslow'):
        return
    skip_slow = pytest.mark.skip(reason='needs --runslow')
    for item in items:
        if 'slow' in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def tracking_model():
    return TrackingModel(TrackingModelParams())


@pytest.fixture
def hmm():
    return default_hmm()


class ConstantLikelihoodModel:
    """Scalar random walk with g == 1, for checks where weighting must be a no-op."""

    def sample_prior_batch(self, n, rng):
        return rng.normal(size=(n, 1))

    def sample_transition_batch(self, x, rng):
        return x + rng.normal(size=x.shape)

    def log_likelihood_batch(self, x, y):
        return np.zeros(len(x))


class GaussianObservationModel:
    """Scalar random walk observed in unit Gaussian noise."""

    def sample_prior_batch(self, n, rng):
        return rng.normal(size=(n, 1))

    def sample_transition_batch(self, x, rng):
        return 0.9 * x + 0.5 * rng.normal(size=x.shape)

    def log_likelihood_batch(self, x, y):
        return -0.5 * (x[:, 0] - y) ** 2


@pytest.fixture
def flat_model():
    return ConstantLikelihoodModel()


@pytest.fixture
def gaussian_model():
    return GaussianObservationModel()
