# tests/test_model.py

# Standard Imports
import math

# External Imports
import numpy as np
import pandas as pd
import pytest
from hypothesis import given, strategies as st
from numpy.testing import assert_allclose, assert_array_equal

# Local Imports
from utils.errors import ModelError
from utils.model import (DiscreteHmmModel, Observation, Region, StateVector, TrackingModel, TrackingModelParams,
                         default_sensor_grid, hmm_sample_and_observe, load_sensor_csv, log_likelihood,
                         sample_prior, sample_transition, simulate_trajectory)

NOISELESS = dict(sigma_r2=1e-30, sigma_v2=1e-30)


class TestParams:
    def test_defaults(self):
        params = TrackingModelParams()
        assert params.n_sensors == 18
        assert params.region == Region(-20.0, 20.0, -10.0, 10.0)
        assert params.sigma_v0_2 == pytest.approx(2.5e-3)

    @pytest.mark.parametrize('changes', [
        {'p1': 0.5, 'p1_bar': 0.6},
        {'p1': 1.0},
        {'p1_bar': 0.0},
        {'mu': 0.0},
        {'sigma_r2': 0.0},
        {'sigma_v0_2': -1.0},
        {'sensors': np.empty((0, 2))},
    ])
    def test_invalid_parameters_rejected(self, changes):
        with pytest.raises(ModelError):
            TrackingModelParams(**changes)

    def test_empty_region_rejected(self):
        with pytest.raises(ModelError):
            Region(1.0, 1.0, 0.0, 1.0)

    def test_sensor_grid_centres(self):
        grid = default_sensor_grid()
        assert grid.shape == (18, 2)
        assert_allclose(np.unique(grid[:, 1]), [-20 / 3, 0.0, 20 / 3])
        assert_allclose(np.unique(grid[:, 0])[:2], [-50 / 3, -10.0])

    def test_load_sensor_csv_orders_by_id(self, tmp_path):
        path = tmp_path / 'sensors.csv'
        pd.DataFrame({'sensor_id': [2, 0, 1], 'x': [3.0, 1.0, 2.0], 'y': [0.0, 0.0, 0.0]}).to_csv(path, index=False)
        assert_array_equal(load_sensor_csv(path)[:, 0], [1.0, 2.0, 3.0])

    def test_load_sensor_csv_missing_columns(self, tmp_path):
        path = tmp_path / 'sensors.csv'
        pd.DataFrame({'x': [1.0], 'y': [0.0]}).to_csv(path, index=False)
        with pytest.raises(ModelError):
            load_sensor_csv(path)


class TestPrior:
    def test_degenerate_velocity(self, rng):
        params = TrackingModelParams(sigma_v0_2=1e-30)
        for _ in range(10):
            assert np.abs(sample_prior(params, rng).v).max() < 1e-10

    def test_position_moments(self, tracking_model, rng):
        x = tracking_model.sample_prior_batch(100_000, rng)
        assert np.abs(x[:, :2].mean(axis=0)).max() < 0.2
        assert x[:, 0].min() >= -20 and x[:, 0].max() <= 20
        assert x[:, 1].min() >= -10 and x[:, 1].max() <= 10

    def test_velocity_variance(self, tracking_model, rng):
        x = tracking_model.sample_prior_batch(100_000, rng)
        assert_allclose(x[:, 2:].var(axis=0), 2.5e-3, rtol=0.1)

    def test_only_given_stream_is_consumed(self, tracking_model):
        a = tracking_model.sample_prior_batch(5, np.random.default_rng(3))
        b = tracking_model.sample_prior_batch(5, np.random.default_rng(3))
        assert_array_equal(a, b)


class TestTransition:
    def test_noiseless_constant_velocity(self, rng):
        params = TrackingModelParams(**NOISELESS)
        x = sample_transition(StateVector(np.array([0.0, 0.0]), np.array([1.0, 0.0])), params, rng)
        assert_allclose(x.r, [1.0, 0.0], atol=1e-10)
        assert_allclose(x.v, [1.0, 0.0], atol=1e-10)

    def test_forced_reset(self, rng):
        params = TrackingModelParams(**NOISELESS)
        x = sample_transition(StateVector(np.array([19.99, 0.0]), np.array([10.0, 0.0])), params, rng)
        assert_array_equal(x.r, [19.99, 0.0])
        assert np.abs(x.v).max() < 0.5

    def test_reset_draws_velocity_after_eta(self):
        model = TrackingModel(TrackingModelParams(**NOISELESS))
        x = model.sample_transition_batch(np.array([[19.99, 0.0, 10.0, 0.0]]), np.random.default_rng(0))
        reference = np.random.default_rng(0)
        reference.normal(size=(1, 4))
        assert_allclose(x[0, 2:], reference.normal(0.0, model.sigma_v0, size=2))

    def test_outside_region_is_contract_error(self, tracking_model, rng):
        with pytest.raises(ModelError):
            tracking_model.sample_transition_batch(np.array([[25.0, 0.0, 0.0, 0.0]]), rng)

    @given(st.integers(min_value=0, max_value=2 ** 32 - 1))
    def test_positions_stay_in_region(self, seed):
        model = TrackingModel()
        states, _ = model.simulate(200, np.random.default_rng(seed))
        assert model.params.region.contains(states[:, :2]).all()

    def test_reset_frequency_matches_reference_sampler(self):
        params = TrackingModelParams()
        model = TrackingModel(params)
        chains, steps = 40, 250

        def count_resets(rng):
            x, resets = np.zeros((1, 4)), 0
            for _ in range(steps):
                nxt = model.sample_transition_batch(x, rng)
                resets += int((nxt[0, :2] == x[0, :2]).all())
                x = nxt
            return resets

        def count_reference_resets(rng):
            # written against the model equations, one coordinate at a time
            r, v, resets = [0.0, 0.0], [0.0, 0.0], 0
            sd_r = math.sqrt(params.kappa ** 2 * params.sigma_v2 + params.sigma_r2)
            sd_v = math.sqrt(params.sigma_v2)
            for _ in range(steps):
                eta = rng.normal(size=4)
                r_new = [r[i] + params.kappa * v[i] + sd_r * eta[i] for i in range(2)]
                v_new = [v[i] + sd_v * eta[2 + i] for i in range(2)]
                if -20 <= r_new[0] <= 20 and -10 <= r_new[1] <= 10:
                    r, v = r_new, v_new
                else:
                    v = list(rng.normal(0.0, math.sqrt(params.sigma_v0_2), size=2))
                    resets += 1
            return resets

        a = np.array([count_resets(np.random.default_rng(1000 + c)) for c in range(chains)])
        b = np.array([count_reference_resets(np.random.default_rng(2000 + c)) for c in range(chains)])
        standard_error = math.sqrt((a.var(ddof=1) + b.var(ddof=1)) / chains)
        assert abs(a.mean() - b.mean()) <= 4 * standard_error + 0.5


class TestLikelihood:
    def test_detection(self):
        params = TrackingModelParams(sensors=[[0.0, 0.0]])
        x = StateVector(np.zeros(2), np.zeros(2))
        assert log_likelihood(x, Observation(np.array([1])), params) == pytest.approx(math.log(0.9))

    def test_false_alarm(self):
        params = TrackingModelParams(sensors=[[0.0, 0.0]])
        x = StateVector(np.array([10.0, 0.0]), np.zeros(2))
        assert log_likelihood(x, Observation(np.array([1])), params) == pytest.approx(math.log(0.01))

    def test_product_over_sensors(self):
        params = TrackingModelParams(sensors=[[0.0, 0.0], [15.0, 0.0]])
        x = StateVector(np.zeros(2), np.zeros(2))
        expected = math.log(0.1) + math.log(0.99)
        assert log_likelihood(x, Observation(np.array([0, 0])), params) == pytest.approx(expected)

    def test_radius_is_inclusive(self):
        model = TrackingModel(TrackingModelParams(sensors=[[0.0, 0.0]]))
        assert model.in_range(np.array([[7.0, 0.0, 0.0, 0.0]]))[0, 0]

    def test_length_mismatch(self, tracking_model):
        with pytest.raises(ModelError):
            tracking_model.log_likelihood_batch(np.zeros((1, 4)), np.zeros(3, dtype=np.int8))

    def test_observation_must_be_binary(self):
        with pytest.raises(ModelError):
            Observation(np.array([0, 2]))

    def test_likelihood_bounded_by_a(self, tracking_model, rng):
        a = tracking_model.likelihood_bound()
        x = tracking_model.sample_prior_batch(500, rng)
        for _ in range(20):
            y = rng.integers(0, 2, size=18)
            g = np.exp(tracking_model.log_likelihood_batch(x, y))
            assert (g >= 1 / a).all() and (g <= a).all()

    @given(seed=st.integers(0, 2 ** 32 - 1), n_sensors=st.integers(1, 6))
    def test_factorizes_over_sensors(self, seed, n_sensors):
        rng = np.random.default_rng(seed)
        sensors = rng.uniform([-20.0, -10.0], [20.0, 10.0], size=(n_sensors, 2))
        model = TrackingModel(TrackingModelParams(sensors=sensors))
        x = model.sample_prior_batch(8, rng)
        y = rng.integers(0, 2, size=n_sensors)
        singles = [TrackingModel(TrackingModelParams(sensors=sensors[j:j + 1])) for j in range(n_sensors)]
        expected = sum(single.log_likelihood_batch(x, y[j:j + 1]) for j, single in enumerate(singles))
        assert_allclose(model.log_likelihood_batch(x, y), expected, rtol=1e-12)


class TestSimulate:
    def test_single_step_shapes(self, rng):
        states, observations = simulate_trajectory(TrackingModelParams(), 1, rng)
        assert len(states) == 1 and len(observations) == 1
        assert len(observations[0]) == 18

    def test_zero_steps_rejected(self, tracking_model, rng):
        with pytest.raises(ModelError):
            tracking_model.simulate(0, rng)

    def test_deterministic_sensors(self, rng):
        model = TrackingModel(TrackingModelParams(p1=1.0, p1_bar=0.0, allow_deterministic_sensors=True))
        states, observations = model.simulate(100, rng)
        assert_array_equal(observations.astype(bool), model.in_range(states))

    def test_export_trajectory(self, tracking_model, rng, tmp_path):
        states, observations = tracking_model.simulate(5, rng)
        path = tmp_path / 'trajectory.csv'
        tracking_model.export_trajectory(states, observations, path)
        frame = pd.read_csv(path)
        assert list(frame.columns[:5]) == ['n', 'r_x', 'r_y', 'v_x', 'v_y']
        assert len(frame.columns) == 5 + 18
        assert_array_equal(frame['n'], np.arange(1, 6))

    def test_same_seed_same_trajectory(self, tracking_model):
        first = tracking_model.simulate(50, np.random.default_rng(31))
        second = tracking_model.simulate(50, np.random.default_rng(31))
        assert_array_equal(first[0], second[0])
        assert_array_equal(first[1], second[1])


class TestDiscreteHmm:
    def test_validation(self):
        with pytest.raises(ModelError):
            DiscreteHmmModel([0.5, 0.5], [[0.9, 0.2], [0.5, 0.5]], [[1.0], [1.0]])
        with pytest.raises(ModelError):
            DiscreteHmmModel([0.7, 0.7], np.eye(2), np.eye(2))
        with pytest.raises(ModelError):
            DiscreteHmmModel([1.0, 0.0], np.eye(2), np.eye(3))

    def test_identity_chain_stays_put(self, rng):
        model = DiscreteHmmModel([1.0, 0.0, 0.0], np.eye(3), np.full((3, 2), 0.5))
        states, _ = hmm_sample_and_observe(model, 50, rng)
        assert (states == 0).all()

    def test_deterministic_emission_reveals_states(self, hmm, rng):
        model = DiscreteHmmModel(hmm.prior, hmm.transition, np.eye(3))
        states, symbols = hmm_sample_and_observe(model, 200, rng)
        assert_array_equal(states, symbols)

    def test_transition_frequencies(self, hmm):
        rng = np.random.default_rng(5)
        x = hmm.sample_transition_batch(np.zeros(100_000, dtype=np.intp), rng)
        assert_allclose(np.bincount(x, minlength=3) / len(x), hmm.transition[0], atol=0.01)

    def test_stationary_distribution(self, hmm):
        pi = hmm.stationary_distribution()
        assert_allclose(pi @ hmm.transition, pi, atol=1e-12)
        assert pi.sum() == pytest.approx(1.0)

    def test_likelihood_bound(self, hmm):
        assert hmm.likelihood_bound() == pytest.approx(10.0)

    def test_long_run_occupancy_is_stationary(self, hmm):
        states, _ = hmm_sample_and_observe(hmm, 200_000, np.random.default_rng(17))
        assert_allclose(np.bincount(states, minlength=3) / len(states), hmm.stationary_distribution(), atol=0.01)

    def test_symbol_out_of_range(self, hmm):
        with pytest.raises(ModelError):
            hmm.likelihood(hmm.n_symbols)
