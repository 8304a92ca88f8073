"""Four-layer Poisson population circuit.

1. ``N`` tuning neurons, neuron ``i`` preferring a prior sample ``S^i``; its
   mean count in a unit window is ``gain * P(x | S^i)``.
2. Divisive normalisation by the population total ``R``.
3. Two readout units with synaptic weights ``w1_i = 1`` for common-branch
   neurons and ``w2_i = 1 - w1_i``.
4. A max over the two readouts picks the cause.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .models import Cause, CueModel, StimulusBatch, log_likelihood, sample_prior_batch
from .sampler import PosteriorEstimate


class SilentPoolError(RuntimeError):
    """The whole population emitted no spikes in the window."""


@dataclass(frozen=True)
class NeuronPool:
    model: CueModel
    preferred: StimulusBatch
    gain: float

    def __post_init__(self):
        if len(self.preferred) < 1:
            raise ValueError("a pool needs at least one neuron")
        if not self.gain > 0:
            raise ValueError(f"gain must be positive, got {self.gain}")

    def __len__(self) -> int:
        return len(self.preferred)

    def likelihoods(self, observations) -> np.ndarray:
        return np.exp(log_likelihood(self.model, self.preferred.stimuli, observations))

    def tuning(self, observations) -> np.ndarray:
        """Expected counts, ``gain * P(x | S^i)``."""
        return self.gain * self.likelihoods(observations)


@dataclass(frozen=True)
class SpikeResponse:
    counts: np.ndarray
    total: int
    normalized: np.ndarray


class Readout(NamedTuple):
    a1: float
    a2: float
    decision: Cause


def build_pool(
    model: CueModel,
    pool_size: int,
    gain: float,
    rng: np.random.Generator,
    allocation: str = "iid",
) -> NeuronPool:
    if pool_size < 1:
        raise ValueError(f"pool_size must be >= 1, got {pool_size}")
    return NeuronPool(model, sample_prior_batch(model, pool_size, rng, allocation), float(gain))


def emit_spikes(pool: NeuronPool, observations, rng: np.random.Generator) -> SpikeResponse:
    counts = rng.poisson(pool.tuning(observations))
    total = int(np.sum(counts))
    if total == 0:
        raise SilentPoolError(f"pool of {len(pool)} neurons was silent at gain {pool.gain:g}")
    return SpikeResponse(counts=counts, total=total, normalized=counts / total)


def _max_readout(weights: np.ndarray, common: np.ndarray) -> Readout:
    a1 = float(np.sum(weights[common]))
    a2 = float(np.sum(weights[~common]))
    return Readout(a1, a2, Cause.COMMON if a1 > a2 else Cause.SEPARATE)


def readout(pool: NeuronPool, response: SpikeResponse) -> Readout:
    return _max_readout(response.normalized, pool.preferred.from_common_cause)


def expected_readout(pool: NeuronPool, observations) -> Readout:
    """Readout with spike counts replaced by their expectations."""
    rates = pool.tuning(observations)
    return _max_readout(rates / np.sum(rates), pool.preferred.from_common_cause)


def circuit_infer(pool: NeuronPool, observations, rng: np.random.Generator) -> PosteriorEstimate:
    response = emit_spikes(pool, observations, rng)
    a1, _, decision = readout(pool, response)
    common_count = int(np.sum(response.counts[pool.preferred.from_common_cause]))
    return PosteriorEstimate(
        p_c1=a1,
        n_samples=len(pool),
        decision=decision,
        sum_common_weight=float(common_count),
        sum_total_weight=float(response.total),
    )
