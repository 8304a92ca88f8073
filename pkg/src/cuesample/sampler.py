"""Importance-sampling estimators with the prior as proposal.

With samples drawn from ``P(S)`` the posterior expectation of ``f`` given
observations ``x`` is estimated by the self-normalised ratio

    sum_i f(S^i) P(x | S^i) / sum_i P(x | S^i)

and ``P(C = 1 | x)`` is the special case where ``f`` is the indicator that a
sample came from the common-cause branch. The same draws feed numerator and
denominator, and both sums share one log-space shift.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .models import Cause, CueModel, StimulusBatch, log_likelihood, sample_prior_batch
from .oracle import decide
from .streams import chunked, parallel_map, stream


class EstimatorDegenerateError(ArithmeticError):
    """Every importance weight underflowed, so the ratio is undefined."""


@dataclass(frozen=True)
class PosteriorEstimate:
    """Estimated ``P(C = 1 | x)`` plus its weight sums.

    The sums are linear but relative to ``exp(log_shift)``, i.e. the true
    weight totals are ``sum_* * exp(log_shift)``.
    """

    p_c1: float
    n_samples: int
    decision: Cause
    sum_common_weight: float
    sum_total_weight: float
    log_shift: float = 0.0


def shifted_sums(log_weights: np.ndarray, values: np.ndarray):
    """``(sum v_i w_i, sum w_i, shift)`` with ``w_i = exp(log_w_i - shift)``."""
    log_weights = np.asarray(log_weights, dtype=float)
    shift = np.max(log_weights)
    if not np.isfinite(shift):
        raise EstimatorDegenerateError(f"no usable importance weight (max log-weight {shift})")
    w = np.exp(log_weights - shift)
    return float(np.sum(w * values)), float(np.sum(w)), float(shift)


def weighted_expectation(
    sample_source: Callable[[int, np.random.Generator], object],
    weight_fn: Callable[[object], np.ndarray],
    value_fn: Callable[[object], np.ndarray],
    n_samples: int,
    rng: np.random.Generator,
) -> float:
    """Self-normalised importance-sampling estimate of ``E[value]``.

    ``sample_source(n, rng)`` returns ``n`` draws from the proposal in any
    container the two callbacks understand; ``weight_fn`` returns log-weights
    and ``value_fn`` the per-draw values, both as length-``n`` arrays.
    """
    if n_samples < 1:
        raise ValueError(f"n_samples must be >= 1, got {n_samples}")
    draws = sample_source(n_samples, rng)
    num, den, _ = shifted_sums(weight_fn(draws), np.asarray(value_fn(draws), dtype=float))
    return num / den


def estimate_from_samples(model: CueModel, observations, samples: StimulusBatch) -> PosteriorEstimate:
    """Posterior estimate from an already-drawn batch of prior samples.

    The indicator is read from the provenance flag. For same-different models
    the shared value of a common-branch sample is drawn inside ``[-L, L]``, so
    the range condition holds by construction.
    """
    log_w = log_likelihood(model, samples.stimuli, observations)
    num, den, shift = shifted_sums(np.atleast_1d(log_w), samples.from_common_cause)
    p = num / den
    return PosteriorEstimate(
        p_c1=p,
        n_samples=len(samples),
        decision=decide(p),
        sum_common_weight=num,
        sum_total_weight=den,
        log_shift=shift,
    )


def is_posterior(
    model: CueModel,
    observations,
    n_samples: int,
    rng: np.random.Generator,
    allocation: str = "stratified",
) -> PosteriorEstimate:
    """Importance-sampling estimate of ``P(C = 1 | observations)``.

    Returns ``p_c1 = 0`` when no common-branch sample was drawn.
    """
    if n_samples < 1:
        raise ValueError(f"n_samples must be >= 1, got {n_samples}")
    samples = sample_prior_batch(model, n_samples, rng, allocation=allocation)
    return estimate_from_samples(model, observations, samples)


class BatchTrialError(RuntimeError):
    def __init__(self, index: int, cause: Exception):
        super().__init__(f"trial {index}: {cause}")
        self.index = index


def _batch_chunk(args):
    models, observations, indices, n_samples, seed, allocation = args
    out = []
    for model, x, i in zip(models, observations, indices):
        try:
            out.append(is_posterior(model, x, n_samples, stream(seed, i), allocation))
        except Exception as exc:
            raise BatchTrialError(i, exc) from exc
    return out


def is_posterior_batch(
    model: CueModel | Sequence[CueModel],
    observation_set,
    n_samples: int,
    seed: int,
    allocation: str = "stratified",
    jobs: int = 1,
    chunk_size: int = 256,
) -> list[PosteriorEstimate]:
    """Run :func:`is_posterior` on every observation vector.

    Trial ``i`` always uses ``stream(seed, i)``, so results do not depend on
    ``jobs``. ``model`` is either shared or one model per trial.
    """
    observations = [np.asarray(x, dtype=float) for x in observation_set]
    if not observations:
        raise ValueError("observation_set is empty")
    models = list(model) if isinstance(model, (list, tuple)) else [model] * len(observations)
    if len(models) != len(observations):
        raise ValueError("need one model per observation vector")
    tasks = [
        ([models[i] for i in r], [observations[i] for i in r], list(r), n_samples, seed, allocation)
        for r in chunked(len(observations), chunk_size)
    ]
    return [est for part in parallel_map(_batch_chunk, tasks, jobs) for est in part]
