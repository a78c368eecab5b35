# utils/model.py

# Standard Imports
import dataclasses
import logging
from dataclasses import dataclass, field
from typing import List, Protocol, Tuple

# External Imports
import numpy as np
import pandas as pd

# Local Imports
from utils.errors import ModelError

logger = logging.getLogger(__name__)

STATE_DIM = 4


class StateSpaceModel(Protocol):
    """
    Batched view of a state-space model {prior, transition kernel, likelihood}.

    Every method works on a leading particle axis so a processing element can
    move its K particles with a handful of array operations.
    """

    def sample_prior_batch(self, n: int, rng: np.random.Generator) -> np.ndarray:
        ...

    def sample_transition_batch(self, x: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        ...

    def log_likelihood_batch(self, x: np.ndarray, y) -> np.ndarray:
        ...


# Tracking model types

@dataclass(frozen=True)
class Region:
    """Axis-aligned rectangle, bounds inclusive."""
    x_min: float = -20.0
    x_max: float = 20.0
    y_min: float = -10.0
    y_max: float = 10.0

    def __post_init__(self):
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise ModelError(f"region bounds are empty: {self}")

    @property
    def low(self) -> np.ndarray:
        return np.array([self.x_min, self.y_min])

    @property
    def high(self) -> np.ndarray:
        return np.array([self.x_max, self.y_max])

    def contains(self, r: np.ndarray) -> np.ndarray:
        """Vectorized membership test over the last axis (x, y)."""
        r = np.asarray(r, dtype=float)
        return (
            (r[..., 0] >= self.x_min) & (r[..., 0] <= self.x_max)
            & (r[..., 1] >= self.y_min) & (r[..., 1] <= self.y_max)
        )


def default_sensor_grid(region=None, columns=6, rows=3) -> np.ndarray:
    """
    Uniform grid of sensors at the centres of a columns x rows tiling of the region.

    With the default region this yields x in {-16.67, -10, -3.33, 3.33, 10, 16.67}
    and y in {-6.67, 0, 6.67}, i.e. J = 18 sensors.
    """
    region = region or Region()
    xs = region.x_min + (region.x_max - region.x_min) * (np.arange(columns) + 0.5) / columns
    ys = region.y_min + (region.y_max - region.y_min) * (np.arange(rows) + 0.5) / rows
    return np.array([(x, y) for y in ys for x in xs])


def load_sensor_csv(path) -> np.ndarray:
    """
    Load sensor positions from a CSV file with columns sensor_id,x,y.

    Rows are ordered by sensor_id so the observation bit order is well defined.
    """
    frame = pd.read_csv(path)
    missing = {'sensor_id', 'x', 'y'} - set(frame.columns)
    if missing:
        raise ModelError(f"sensor file {path} lacks columns {sorted(missing)}")
    frame = frame.sort_values('sensor_id', kind='mergesort')
    logger.info(f"Loaded {len(frame)} sensors from {path}")
    return frame[['x', 'y']].to_numpy(dtype=float)


@dataclass(frozen=True, eq=False)
class TrackingModelParams:
    """
    Parameters of the binary-sensor target tracking model.

    sigma_v0_2 is the initial (and reset) velocity variance; sigma_v0 = 5e-2 gives 2.5e-3.
    Set allow_deterministic_sensors to accept p1 = 1 and p1_bar = 0 in simulations;
    such parameters have unbounded log-likelihoods and are not meant for filtering.
    """
    region: Region = field(default_factory=Region)
    kappa: float = 1.0
    sigma_r2: float = 1e-2
    sigma_v2: float = 1e-2
    sigma_v0_2: float = 2.5e-3
    sensors: np.ndarray = field(default_factory=default_sensor_grid)
    mu: float = 7.0
    p1: float = 0.9
    p1_bar: float = 1e-2
    allow_deterministic_sensors: bool = False

    def __post_init__(self):
        sensors = np.array(self.sensors, dtype=float).reshape(-1, 2)
        sensors.setflags(write=False)
        object.__setattr__(self, 'sensors', sensors)

        if self.allow_deterministic_sensors:
            if not (0.0 <= self.p1_bar < self.p1 <= 1.0):
                raise ModelError(f"need 0 <= p1_bar < p1 <= 1, got p1={self.p1}, p1_bar={self.p1_bar}")
        elif not (0.0 < self.p1_bar < self.p1 < 1.0):
            raise ModelError(f"need 0 < p1_bar < p1 < 1, got p1={self.p1}, p1_bar={self.p1_bar}")
        if self.mu <= 0:
            raise ModelError(f"detection radius must be positive, got {self.mu}")
        for name in ('sigma_r2', 'sigma_v2', 'sigma_v0_2'):
            if getattr(self, name) <= 0:
                raise ModelError(f"{name} must be positive, got {getattr(self, name)}")
        if self.kappa <= 0:
            raise ModelError(f"kappa must be positive, got {self.kappa}")
        if len(sensors) < 1:
            raise ModelError("at least one sensor is required")

    @property
    def n_sensors(self) -> int:
        return len(self.sensors)

    def replace(self, **changes) -> 'TrackingModelParams':
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True, eq=False)
class StateVector:
    """Target position r (m) and velocity v (m/step)."""
    r: np.ndarray
    v: np.ndarray

    def as_array(self) -> np.ndarray:
        return np.concatenate([self.r, self.v])

    @classmethod
    def from_array(cls, x) -> 'StateVector':
        x = np.asarray(x, dtype=float)
        return cls(r=x[:2].copy(), v=x[2:4].copy())


@dataclass(frozen=True, eq=False)
class Observation:
    """One binary output per sensor."""
    bits: np.ndarray

    def __post_init__(self):
        bits = np.asarray(self.bits)
        if bits.ndim != 1 or not np.isin(bits, (0, 1)).all():
            raise ModelError(f"observation must be a 0/1 vector, got {bits}")
        bits = bits.astype(np.int8)
        bits.setflags(write=False)
        object.__setattr__(self, 'bits', bits)

    def __len__(self):
        return len(self.bits)


class TrackingModel:
    """
    Constant-velocity target inside a rectangle, observed by J binary sensors.

    Model objects are immutable after construction; random streams are passed in
    by the caller and consumed in a fixed order:
      - prior: n x 2 uniforms (position), then n x 2 normals (velocity);
      - transition: n x 4 normals (eta), then 2 normals per rejected particle;
      - observation: J uniforms per step, bit = u < p.
    """

    state_dim = STATE_DIM

    def __init__(self, params: TrackingModelParams = None):
        self.params = params or TrackingModelParams()
        p = self.params
        kappa = p.kappa
        self.A = np.block([
            [np.eye(2), kappa * np.eye(2)],
            [np.zeros((2, 2)), np.eye(2)],
        ])
        self.noise_std = np.sqrt(np.array([
            kappa ** 2 * p.sigma_v2 + p.sigma_r2,
            kappa ** 2 * p.sigma_v2 + p.sigma_r2,
            p.sigma_v2,
            p.sigma_v2,
        ]))
        self.sigma_v0 = np.sqrt(p.sigma_v0_2)

        # log g(y(j)|x) indexed by [in_range, bit]
        with np.errstate(divide='ignore'):
            self._log_factor = np.log(np.array([
                [1.0 - p.p1_bar, p.p1_bar],
                [1.0 - p.p1, p.p1],
            ]))

    # Batched operations used by the engine

    def sample_prior_batch(self, n, rng):
        region = self.params.region
        r = rng.uniform(region.low, region.high, size=(n, 2))
        v = rng.normal(0.0, self.sigma_v0, size=(n, 2))
        return np.hstack([r, v])

    def sample_transition_batch(self, x, rng):
        x = np.asarray(x, dtype=float)
        region = self.params.region
        if not region.contains(x[:, :2]).all():
            raise ModelError("transition requires every previous position to lie inside the region")

        eta = rng.normal(size=x.shape) * self.noise_std
        candidate = x @ self.A.T + eta

        rejected = ~region.contains(candidate[:, :2])
        n_rejected = int(rejected.sum())
        if n_rejected:
            candidate[rejected, :2] = x[rejected, :2]
            candidate[rejected, 2:] = rng.normal(0.0, self.sigma_v0, size=(n_rejected, 2))
        return candidate

    def in_range(self, x) -> np.ndarray:
        """Boolean (n, J) matrix: sensor j sees the target (distance <= mu, ties in range)."""
        r = np.asarray(x, dtype=float)[:, :2]
        distances = np.linalg.norm(r[:, None, :] - self.params.sensors[None, :, :], axis=2)
        return distances <= self.params.mu

    def log_likelihood_batch(self, x, y):
        bits = y.bits if isinstance(y, Observation) else np.asarray(y)
        if len(bits) != self.params.n_sensors:
            raise ModelError(f"observation has {len(bits)} entries, model has {self.params.n_sensors} sensors")
        factors = self._log_factor[self.in_range(x).astype(np.intp), bits[None, :].astype(np.intp)]
        return factors.sum(axis=1)

    def detection_probabilities(self, x) -> np.ndarray:
        p = self.params
        return np.where(self.in_range(x), p.p1, p.p1_bar)

    def observe_batch(self, x, rng) -> np.ndarray:
        """Draw one binary observation vector per row of x."""
        probabilities = self.detection_probabilities(x)
        u = rng.random(probabilities.shape)
        return (u < probabilities).astype(np.int8)

    def likelihood_bounds(self) -> Tuple[float, float]:
        """Smallest and largest single-sensor likelihood factor."""
        p = self.params
        return min(p.p1_bar, 1.0 - p.p1), max(p.p1, 1.0 - p.p1_bar)

    def likelihood_bound(self) -> float:
        """Constant a with 1/a <= g(y|x) <= a for every x and y."""
        low, high = self.likelihood_bounds()
        J = self.params.n_sensors
        return max(high ** J, low ** -J)

    # Single-state operations

    def sample_prior(self, rng) -> StateVector:
        return StateVector.from_array(self.sample_prior_batch(1, rng)[0])

    def sample_transition(self, x_prev: StateVector, rng) -> StateVector:
        return StateVector.from_array(self.sample_transition_batch(x_prev.as_array()[None, :], rng)[0])

    def log_likelihood(self, x: StateVector, y: Observation) -> float:
        return float(self.log_likelihood_batch(x.as_array()[None, :], y)[0])

    def simulate(self, n_steps, rng) -> Tuple[np.ndarray, np.ndarray]:
        """
        Simulate x_1..x_n and y_1..y_n as arrays of shape (n, 4) and (n, J).

        x_0 is drawn from the prior and not returned; y_n is generated from x_n.
        """
        if n_steps < 1:
            raise ModelError(f"n_steps must be at least 1, got {n_steps}")
        states = np.empty((n_steps, STATE_DIM))
        observations = np.empty((n_steps, self.params.n_sensors), dtype=np.int8)
        x = self.sample_prior_batch(1, rng)
        for n in range(n_steps):
            x = self.sample_transition_batch(x, rng)
            states[n] = x[0]
            observations[n] = self.observe_batch(x, rng)[0]
        return states, observations

    def simulate_trajectory(self, n_steps, rng) -> Tuple[List[StateVector], List[Observation]]:
        states, observations = self.simulate(n_steps, rng)
        return (
            [StateVector.from_array(x) for x in states],
            [Observation(bits) for bits in observations],
        )

    def export_trajectory(self, states, observations, path):
        """Write a simulated trajectory as CSV: n, r_x, r_y, v_x, v_y, s0..s{J-1}."""
        frame = pd.DataFrame(np.asarray(states), columns=['r_x', 'r_y', 'v_x', 'v_y'])
        frame.insert(0, 'n', np.arange(1, len(frame) + 1))
        bits = pd.DataFrame(np.asarray(observations), columns=[f's{j}' for j in range(self.params.n_sensors)])
        pd.concat([frame, bits], axis=1).to_csv(path, index=False, float_format='%.10g')
        logger.info(f"Trajectory of {len(frame)} steps written to {path}")


# Functional forms over the tracking parameters

def sample_prior(params: TrackingModelParams, rng) -> StateVector:
    return TrackingModel(params).sample_prior(rng)


def sample_transition(x_prev: StateVector, params: TrackingModelParams, rng) -> StateVector:
    return TrackingModel(params).sample_transition(x_prev, rng)


def log_likelihood(x: StateVector, y: Observation, params: TrackingModelParams) -> float:
    return TrackingModel(params).log_likelihood(x, y)


def simulate_trajectory(params: TrackingModelParams, n_steps, rng):
    return TrackingModel(params).simulate_trajectory(n_steps, rng)


# Discrete HMM used as an exactly solvable test bed

def _categorical(cdf_rows, rng) -> np.ndarray:
    """Inverse-CDF draw, one per row of cumulative probabilities."""
    u = rng.random(len(cdf_rows))
    idx = (u[:, None] >= cdf_rows).sum(axis=1)
    return np.minimum(idx, cdf_rows.shape[1] - 1)


class DiscreteHmmModel:
    """
    Finite-state hidden Markov model.

    Args:
        prior: probability vector over S states.
        transition: S x S row-stochastic matrix, transition[i, j] = P(x_n = j | x_{n-1} = i).
        emission: S x O matrix, emission[s, o] = P(y = o | x = s); column o is the
            likelihood vector over states for symbol o.
    """

    TOLERANCE = 1e-12

    def __init__(self, prior, transition, emission):
        self.prior = np.array(prior, dtype=float)
        self.transition = np.array(transition, dtype=float)
        self.emission = np.array(emission, dtype=float)
        S = len(self.prior)

        if self.transition.shape != (S, S):
            raise ModelError(f"transition must be {S}x{S}, got {self.transition.shape}")
        if self.emission.ndim != 2 or self.emission.shape[0] != S:
            raise ModelError(f"emission must have {S} rows, got {self.emission.shape}")
        for name, values in (('prior', self.prior), ('transition', self.transition), ('emission', self.emission)):
            if (values < 0).any():
                raise ModelError(f"{name} has negative entries")
        if abs(self.prior.sum() - 1.0) > self.TOLERANCE:
            raise ModelError(f"prior sums to {self.prior.sum()}")
        if (np.abs(self.transition.sum(axis=1) - 1.0) > self.TOLERANCE).any():
            raise ModelError("transition rows must sum to one")

        self._prior_cdf = np.cumsum(self.prior)[None, :]
        self._transition_cdf = np.cumsum(self.transition, axis=1)
        self._emission_cdf = np.cumsum(self.emission, axis=1)
        with np.errstate(divide='ignore'):
            self._log_emission = np.log(self.emission)

        for array in (self.prior, self.transition, self.emission):
            array.setflags(write=False)

    @property
    def n_states(self) -> int:
        return len(self.prior)

    @property
    def n_symbols(self) -> int:
        return self.emission.shape[1]

    def likelihood(self, symbol) -> np.ndarray:
        if not 0 <= symbol < self.n_symbols:
            raise ModelError(f"symbol {symbol} outside 0..{self.n_symbols - 1}")
        return self.emission[:, symbol]

    def likelihood_bound(self) -> float:
        """Constant a with 1/a <= g <= a over every state and symbol (inf if some g is 0)."""
        low, high = self.emission.min(), self.emission.max()
        return max(high, np.inf if low == 0 else 1.0 / low)

    def stationary_distribution(self) -> np.ndarray:
        values, vectors = np.linalg.eig(self.transition.T)
        v = np.real(vectors[:, np.argmin(np.abs(values - 1.0))])
        return v / v.sum()

    def sample_prior_batch(self, n, rng):
        return _categorical(np.repeat(self._prior_cdf, n, axis=0), rng)

    def sample_transition_batch(self, x, rng):
        return _categorical(self._transition_cdf[np.asarray(x)], rng)

    def log_likelihood_batch(self, x, y):
        return self._log_emission[np.asarray(x), int(y)]

    def observe_batch(self, x, rng):
        return _categorical(self._emission_cdf[np.asarray(x)], rng)


def hmm_sample_and_observe(model: DiscreteHmmModel, n_steps, rng) -> Tuple[np.ndarray, np.ndarray]:
    """
    Simulate states x_1..x_n and symbols y_1..y_n from a discrete HMM.

    x_0 is drawn from the prior and not returned, matching simulate().
    """
    states = np.empty(n_steps, dtype=np.intp)
    symbols = np.empty(n_steps, dtype=np.intp)
    x = model.sample_prior_batch(1, rng)
    for n in range(n_steps):
        x = model.sample_transition_batch(x, rng)
        states[n] = x[0]
        symbols[n] = model.observe_batch(x, rng)[0]
    return states, symbols


def default_hmm() -> DiscreteHmmModel:
    """Three-state chain with noisy three-symbol emissions, used for oracle checks."""
    return DiscreteHmmModel(
        prior=[0.5, 0.3, 0.2],
        transition=[
            [0.80, 0.15, 0.05],
            [0.10, 0.80, 0.10],
            [0.05, 0.15, 0.80],
        ],
        emission=[
            [0.70, 0.20, 0.10],
            [0.15, 0.70, 0.15],
            [0.10, 0.20, 0.70],
        ],
    )
