"""Generative causal models for cue combination.

Three variants share one interface: a binary cause ``C`` (1 = common,
2 = separate), latent stimuli ``S_1..S_n`` and Gaussian cues
``X_i ~ N(S_i, sigma_i^2)``.

* :class:`TwoCueModel` and :class:`MultiCueModel` draw a single
  ``S ~ N(0, sigma_s^2)`` copied to every slot when ``C = 1`` and i.i.d.
  ``S_i ~ N(0, sigma_s^2)`` when ``C = 2``.
* :class:`SameDiffModel` draws ``mu ~ U[-L, L]`` copied to every slot when
  ``C = 1``; when ``C = 2`` each object gets its own ``mu_i ~ U[-L, L]`` and
  ``S_i ~ N(mu_i, sigma_s^2)``.

The point mass on equal stimuli under ``C = 1`` is carried by a provenance
flag on every sample, never by comparing floats.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

LOG_2PI = math.log(2.0 * math.pi)


class ModelError(ValueError):
    """Raised when model parameters violate their invariants."""


class Cause(enum.IntEnum):
    COMMON = 1
    SEPARATE = 2


def _check_prior(prior_c1: float) -> None:
    if not 0.0 < prior_c1 < 1.0:
        raise ModelError(f"prior_c1 must lie in (0, 1), got {prior_c1}")


def _check_positive(name: str, value: float) -> None:
    if not (value > 0.0 and math.isfinite(value)):
        raise ModelError(f"{name} must be a positive finite real, got {value}")


def _as_sigmas(sigmas: Sequence[float], expected: int, name: str) -> tuple[float, ...]:
    values = tuple(float(s) for s in sigmas)
    if len(values) != expected:
        raise ModelError(f"{name} has {len(values)} entries, expected {expected}")
    for i, s in enumerate(values):
        _check_positive(f"{name}[{i}]", s)
    return values


@dataclass(frozen=True)
class TwoCueModel:
    prior_c1: float = 0.5
    sigma_s: float = 4.0
    sigma_1: float = 6.0
    sigma_2: float = 6.0

    kind = "two-cue"

    def __post_init__(self):
        _check_prior(self.prior_c1)
        _check_positive("sigma_s", self.sigma_s)
        _check_positive("sigma_1", self.sigma_1)
        _check_positive("sigma_2", self.sigma_2)

    @property
    def n_cues(self) -> int:
        return 2

    @property
    def sigmas(self) -> tuple[float, float]:
        return (self.sigma_1, self.sigma_2)


@dataclass(frozen=True)
class MultiCueModel:
    n_cues: int
    sigmas: tuple[float, ...]
    prior_c1: float = 0.5
    sigma_s: float = 4.0

    kind = "multi-cue"

    def __post_init__(self):
        if int(self.n_cues) != self.n_cues or self.n_cues < 2:
            raise ModelError(f"n_cues must be an integer >= 2, got {self.n_cues}")
        _check_prior(self.prior_c1)
        _check_positive("sigma_s", self.sigma_s)
        object.__setattr__(self, "sigmas", _as_sigmas(self.sigmas, self.n_cues, "sigmas"))


@dataclass(frozen=True)
class SameDiffModel:
    n_objects: int
    sigmas: tuple[float, ...]
    prior_c1: float = 0.5
    half_range: float = 10.0
    sigma_s: float = 2.0

    kind = "same-different"

    def __post_init__(self):
        if int(self.n_objects) != self.n_objects or self.n_objects < 2:
            raise ModelError(f"n_objects must be an integer >= 2, got {self.n_objects}")
        _check_prior(self.prior_c1)
        _check_positive("half_range", self.half_range)
        _check_positive("sigma_s", self.sigma_s)
        object.__setattr__(self, "sigmas", _as_sigmas(self.sigmas, self.n_objects, "sigmas"))

    @property
    def n_cues(self) -> int:
        return self.n_objects


CueModel = Union[TwoCueModel, MultiCueModel, SameDiffModel]

MODEL_KINDS = ("two-cue", "multi-cue", "same-different")


def make_model(kind: str, **params) -> CueModel:
    """Build and validate a model of the given kind.

    >>> make_model("two-cue", sigma_s=4, sigma_1=6, sigma_2=6).sigmas
    (6, 6)
    """
    if kind == "two-cue":
        return TwoCueModel(**params)
    if kind == "multi-cue":
        return MultiCueModel(**params)
    if kind == "same-different":
        return SameDiffModel(**params)
    raise ModelError(f"unknown model kind {kind!r}; expected one of {MODEL_KINDS}")


@dataclass(frozen=True)
class StimulusSample:
    """One prior draw of the stimuli with the branch that produced it."""

    stimuli: np.ndarray
    from_common_cause: bool
    mu: float | None = None


@dataclass(frozen=True)
class StimulusBatch:
    """``N`` prior draws stored column-wise.

    ``mu`` is NaN wherever it is undefined (all two-/multi-cue rows and the
    separate-branch rows of a same-different model).
    """

    stimuli: np.ndarray
    from_common_cause: np.ndarray
    mu: np.ndarray = field(repr=False)

    def __len__(self) -> int:
        return self.stimuli.shape[0]

    def __getitem__(self, i: int) -> StimulusSample:
        mu = float(self.mu[i])
        return StimulusSample(
            stimuli=self.stimuli[i].copy(),
            from_common_cause=bool(self.from_common_cause[i]),
            mu=None if math.isnan(mu) else mu,
        )

    @property
    def n_common(self) -> int:
        return int(np.count_nonzero(self.from_common_cause))


@dataclass(frozen=True)
class Trial:
    true_cause: Cause
    stimuli: np.ndarray
    observations: np.ndarray


def _fill_branches(model: CueModel, common: np.ndarray, rng: np.random.Generator):
    """Draw stimuli for rows whose branch is already fixed by ``common``."""
    n_rows, n = common.shape[0], model.n_cues
    n_common = int(np.count_nonzero(common))
    n_sep = n_rows - n_common
    stimuli = np.empty((n_rows, n))
    mu = np.full(n_rows, np.nan)
    L = getattr(model, "half_range", None)

    if L is None:
        shared = rng.normal(0.0, model.sigma_s, size=n_common)
        separate = rng.normal(0.0, model.sigma_s, size=(n_sep, n))
    else:
        shared = rng.uniform(-L, L, size=n_common)
        centres = rng.uniform(-L, L, size=(n_sep, n))
        separate = centres + rng.normal(0.0, model.sigma_s, size=(n_sep, n))
        mu[common] = shared

    # Column broadcast gives bit-identical copies of the shared draw.
    stimuli[common] = shared[:, None]
    stimuli[~common] = separate
    return stimuli, mu


def sample_prior_batch(
    model: CueModel,
    n_samples: int,
    rng: np.random.Generator,
    allocation: str = "iid",
) -> StimulusBatch:
    """Draw ``n_samples`` stimulus vectors from ``P(S_1..S_n)``.

    ``allocation="iid"`` draws every cause independently from the prior.
    ``allocation="stratified"`` fixes the number of common-branch rows to
    ``floor(prior_c1 * N + U)``, ``U ~ U[0, 1)``, which keeps the expected
    branch frequencies at the prior while removing the binomial jitter.
    Common rows come first in the stratified layout.
    """
    if n_samples < 1:
        raise ModelError(f"n_samples must be >= 1, got {n_samples}")
    if allocation == "iid":
        common = rng.random(n_samples) < model.prior_c1
    elif allocation == "stratified":
        n_common = min(n_samples, math.floor(model.prior_c1 * n_samples + rng.random()))
        common = np.arange(n_samples) < n_common
    else:
        raise ModelError(f"unknown allocation {allocation!r}")
    stimuli, mu = _fill_branches(model, common, rng)
    return StimulusBatch(stimuli=stimuli, from_common_cause=common, mu=mu)


def sample_prior_stimuli(model: CueModel, rng: np.random.Generator) -> StimulusSample:
    return sample_prior_batch(model, 1, rng)[0]


def sample_trial(model: CueModel, rng: np.random.Generator) -> Trial:
    """Generate ``C``, then the stimuli given ``C``, then the noisy cues."""
    common = rng.random() < model.prior_c1
    stimuli, _ = _fill_branches(model, np.array([common]), rng)
    stimuli = stimuli[0]
    observations = stimuli + rng.normal(0.0, np.asarray(model.sigmas))
    cause = Cause.COMMON if common else Cause.SEPARATE
    return Trial(true_cause=cause, stimuli=stimuli, observations=observations)


def log_likelihood(model: CueModel, stimuli, observations) -> np.ndarray | float:
    """``sum_i log N(x_i; s_i, sigma_i^2)``.

    ``stimuli`` may be a single vector or an ``(N, n)`` array; the result is
    a float or a length-``N`` array accordingly.
    """
    sigmas = np.asarray(model.sigmas)
    s = np.asarray(stimuli, dtype=float)
    x = np.asarray(observations, dtype=float)
    n = model.n_cues
    if s.shape[-1] != n or x.shape[-1] != n:
        raise ModelError(
            f"expected {n} entries per vector, got stimuli {s.shape} and observations {x.shape}"
        )
    z = (x - s) / sigmas
    const = -np.sum(np.log(sigmas)) - 0.5 * n * LOG_2PI
    out = const - 0.5 * np.sum(z * z, axis=-1)
    return float(out) if np.ndim(out) == 0 else out
