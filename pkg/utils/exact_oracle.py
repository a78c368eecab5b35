# utils/exact_oracle.py

# Standard Imports
from dataclasses import dataclass
from typing import List, Sequence

# External Imports
import numpy as np

# Local Imports
from utils.errors import ImpossibleObservationError, ModelError
from utils.model import DiscreteHmmModel


@dataclass(frozen=True, eq=False)
class DiscreteDistribution:
    """Probability vector over the S states of a discrete HMM."""
    probabilities: np.ndarray

    TOLERANCE = 1e-12

    def __post_init__(self):
        p = np.array(self.probabilities, dtype=float)
        if p.ndim != 1 or (p < 0).any() or abs(p.sum() - 1.0) > self.TOLERANCE:
            raise ModelError(f"not a probability vector: {p}")
        p.setflags(write=False)
        object.__setattr__(self, 'probabilities', p)

    def __len__(self):
        return len(self.probabilities)


def forward_update(prior: DiscreteDistribution, model: DiscreteHmmModel, obs_symbol) -> DiscreteDistribution:
    """
    One exact filter step: predict through the transition matrix, then apply Bayes' rule.

    Returns normalize(g * (T^T prior)) with g the likelihood column of obs_symbol.

    Raises:
        ImpossibleObservationError: When the predicted probability of obs_symbol is zero.
    """
    predicted = model.transition.T @ prior.probabilities
    unnormalized = model.likelihood(obs_symbol) * predicted
    mass = unnormalized.sum()
    if mass <= 0.0:
        raise ImpossibleObservationError(f"symbol {obs_symbol} has zero predicted probability")
    posterior = unnormalized / mass
    # renormalize once more so rounding never trips the 1e-12 check
    return DiscreteDistribution(posterior / posterior.sum())


def exact_filter_sequence(model: DiscreteHmmModel, observations: Sequence[int]) -> List[DiscreteDistribution]:
    """Exact filters pi_0 = prior, pi_1, ..., pi_n; n + 1 entries."""
    filters = [DiscreteDistribution(model.prior)]
    for symbol in observations:
        filters.append(forward_update(filters[-1], model, symbol))
    return filters
