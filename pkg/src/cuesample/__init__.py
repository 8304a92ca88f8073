"""Importance-sampling causal inference for cue combination."""

__version__ = "0.1.0"

from .models import (
    Cause,
    ModelError,
    MultiCueModel,
    SameDiffModel,
    StimulusBatch,
    StimulusSample,
    Trial,
    TwoCueModel,
    log_likelihood,
    make_model,
    sample_prior_batch,
    sample_prior_stimuli,
    sample_trial,
)
from .oracle import QuadratureSpec, decide, exact_posterior, quadrature_posterior
from .sampler import (
    EstimatorDegenerateError,
    PosteriorEstimate,
    is_posterior,
    is_posterior_batch,
    weighted_expectation,
)
from .neural import (
    NeuronPool,
    SilentPoolError,
    SpikeResponse,
    build_pool,
    circuit_infer,
    emit_spikes,
    expected_readout,
    readout,
)
