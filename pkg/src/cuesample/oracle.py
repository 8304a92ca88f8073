"""Exact posterior of a common cause, and a quadrature cross-check.

The closed forms marginalise the latent stimuli analytically:

* two-/multi-cue, ``C = 1``: ``x ~ N(0, sigma_s^2 11^T + diag(sigma_i^2))``,
  evaluated through the rank-one determinant and inverse identities;
* two-/multi-cue, ``C = 2``: ``x_i ~ N(0, sigma_s^2 + sigma_i^2)`` independently;
* same-different: Gaussian products integrated against the uniform prior on
  ``mu``, expressed with normal CDF differences.

Everything is composed in log space.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import simpson
from scipy.special import expit, log_ndtr

from .models import LOG_2PI, Cause, CueModel, ModelError, SameDiffModel


@dataclass(frozen=True)
class QuadratureSpec:
    """Grid for :func:`quadrature_posterior`.

    Unbounded latent axes span ``grid_half_width`` total standard deviations
    beyond the data; the ``mu`` axis of a same-different model spans exactly
    ``[-L, L]``.
    """

    grid_half_width: float = 8.0
    points_per_dim: int = 1001

    def __post_init__(self):
        if not self.grid_half_width > 0:
            raise ValueError("grid_half_width must be positive")
        if self.points_per_dim < 101 or self.points_per_dim % 2 == 0:
            raise ValueError("points_per_dim must be odd and >= 101")


def _check_obs(model: CueModel, observations) -> np.ndarray:
    x = np.asarray(observations, dtype=float)
    if x.shape[-1:] != (model.n_cues,):
        raise ModelError(f"observations shape {x.shape} does not end in {model.n_cues}")
    return x


def log_ndtr_diff(lo, hi):
    """``log(Phi(hi) - Phi(lo))`` for ``lo < hi``, stable in both tails."""
    lo, hi = np.broadcast_arrays(np.asarray(lo, dtype=float), np.asarray(hi, dtype=float))
    # Reflect into the lower tail, where log_ndtr keeps full precision.
    flip = lo > 0
    a = np.where(flip, -hi, lo)
    b = np.where(flip, -lo, hi)
    log_b = log_ndtr(b)
    return log_b + np.log1p(-np.exp(log_ndtr(a) - log_b))


def _log_marginals_gaussian(model: CueModel, x: np.ndarray):
    var = np.asarray(model.sigmas) ** 2
    vs = model.sigma_s ** 2
    n = model.n_cues
    a = np.sum(1.0 / var)
    b = np.sum(x / var, axis=-1)
    quad_diag = np.sum(x * x / var, axis=-1)
    # det(D + vs 11^T) = det(D) (1 + vs 1^T D^-1 1)
    log_det = np.sum(np.log(var)) + math.log1p(vs * a)
    quad = quad_diag - vs * b * b / (1.0 + vs * a)
    log_l1 = -0.5 * (n * LOG_2PI + log_det + quad)

    tot = vs + var
    log_l2 = -0.5 * np.sum(LOG_2PI + np.log(tot) + x * x / tot, axis=-1)
    return log_l1, log_l2


def _log_marginals_samediff(model: SameDiffModel, x: np.ndarray):
    var = np.asarray(model.sigmas) ** 2
    L = model.half_range
    n = model.n_cues
    log_unif = -math.log(2.0 * L)

    v = 1.0 / np.sum(1.0 / var)
    m = v * np.sum(x / var, axis=-1)
    resid = np.sum((x - m[..., None]) ** 2 / var, axis=-1)
    log_scale = (
        -0.5 * (n - 1) * LOG_2PI - 0.5 * np.sum(np.log(var)) + 0.5 * math.log(v) - 0.5 * resid
    )
    sd = math.sqrt(v)
    log_l1 = log_unif + log_scale + log_ndtr_diff((-L - m) / sd, (L - m) / sd)

    tau = np.sqrt(model.sigma_s ** 2 + var)
    log_l2 = np.sum(log_unif + log_ndtr_diff((x - L) / tau, (x + L) / tau), axis=-1)
    return log_l1, log_l2


def log_marginals(model: CueModel, observations):
    """``(log P(x | C=1), log P(x | C=2))``; broadcasts over leading axes."""
    x = _check_obs(model, observations)
    if isinstance(model, SameDiffModel):
        return _log_marginals_samediff(model, x)
    return _log_marginals_gaussian(model, x)


def _posterior(prior_c1: float, log_l1, log_l2):
    logit = math.log(prior_c1) - math.log1p(-prior_c1) + log_l1 - log_l2
    p = expit(logit)
    return float(p) if np.ndim(p) == 0 else p


def exact_posterior(model: CueModel, observations):
    """``P(C = 1 | x)`` in closed form.

    >>> from cuesample.models import TwoCueModel
    >>> round(exact_posterior(TwoCueModel(0.5, 4, 6, 6), [0, 0]), 4)
    0.5124
    """
    log_l1, log_l2 = log_marginals(model, observations)
    return _posterior(model.prior_c1, log_l1, log_l2)


def _log_simpson(log_f: np.ndarray, grid: np.ndarray, axis: int = -1) -> np.ndarray:
    shift = np.max(log_f, axis=axis, keepdims=True)
    total = simpson(np.exp(log_f - shift), x=grid, axis=axis)
    return np.log(total) + np.squeeze(shift, axis=axis)


def _log_normal(x, mean, var):
    return -0.5 * (LOG_2PI + np.log(var) + (x - mean) ** 2 / var)


def quadrature_posterior(model: CueModel, observations, spec: QuadratureSpec | None = None) -> float:
    """``P(C = 1 | x)`` by Simpson integration over the latent variables.

    Independent of the closed forms: only the model's conditional densities
    are evaluated on the grid. Same-different models are limited to three
    objects because each separate-cause factor is a 2-D integral.
    """
    spec = spec or QuadratureSpec()
    x = _check_obs(model, observations)
    if x.ndim != 1:
        raise ModelError("quadrature_posterior takes one observation vector")
    var = np.asarray(model.sigmas) ** 2
    vs = model.sigma_s ** 2
    hw, P = spec.grid_half_width, spec.points_per_dim

    if isinstance(model, SameDiffModel):
        if model.n_objects > 3:
            raise ModelError("quadrature cost guard: same-different supports at most 3 objects")
        L = model.half_range
        log_u = -math.log(2.0 * L)
        mu = np.linspace(-L, L, P)
        log_f1 = log_u + np.sum(_log_normal(x[:, None], mu[None, :], var[:, None]), axis=0)
        log_l1 = _log_simpson(log_f1, mu)

        log_l2 = 0.0
        for xi, vi in zip(x, var):
            width = hw * math.sqrt(vs + vi)
            s = np.linspace(min(-L, xi) - width, max(L, xi) + width, P)
            # rows: mu, cols: s
            log_f = (
                log_u
                + _log_normal(s[None, :], mu[:, None], vs)
                + _log_normal(xi, s[None, :], vi)
            )
            inner = _log_simpson(log_f, s, axis=1)
            log_l2 += _log_simpson(inner, mu)
    else:
        width = hw * math.sqrt(vs + float(np.max(var)))
        s = np.linspace(min(0.0, x.min()) - width, max(0.0, x.max()) + width, P)
        log_f1 = _log_normal(s, 0.0, vs) + np.sum(_log_normal(x[:, None], s[None, :], var[:, None]), axis=0)
        log_l1 = _log_simpson(log_f1, s)

        log_l2 = 0.0
        for xi, vi in zip(x, var):
            width = hw * math.sqrt(vs + vi)
            s = np.linspace(min(0.0, xi) - width, max(0.0, xi) + width, P)
            log_l2 += _log_simpson(_log_normal(s, 0.0, vs) + _log_normal(xi, s, vi), s)

    return _posterior(model.prior_c1, float(log_l1), float(log_l2))


def decide(p_c1: float, threshold: float = 0.5) -> Cause:
    """Common iff ``p_c1 > threshold``; a tie goes to Separate."""
    return Cause.COMMON if p_c1 > threshold else Cause.SEPARATE
