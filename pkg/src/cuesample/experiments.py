"""Experiment harness producing plot-ready result tables.

Every random quantity is drawn from a stream keyed by the run seed and the
work item's position (see :mod:`cuesample.streams`), so tables are
bit-identical for any ``jobs`` value.

"Error rate" here is the fraction of trials whose sampled decision differs
from the exact-posterior decision. The fraction differing from the cause
that actually generated the trial is reported separately as
``truth_error_rate`` (for the estimator) and ``oracle_truth_error_rate``
(the Bayes error of the exact rule on the same trials).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.stats

from . import __version__
from .config import ExperimentConfig, emit_config
from .models import (
    Cause,
    MultiCueModel,
    SameDiffModel,
    TwoCueModel,
    sample_prior_batch,
    sample_trial,
)
from .neural import SilentPoolError, build_pool, emit_spikes
from .oracle import decide, exact_posterior
from .sampler import estimate_from_samples, is_posterior
from .streams import chunked, parallel_map, stream
from .tables import ResultTable, wilson_interval

# Stream key tags; the first element of every key path.
GEN, EST, POOL, SPIKE, OBS, LEMMA_X, LEMMA_Y = range(7)
# Second element: which experiment owns the stream.
EXP1, EXP2, EXP3, EXP4, MULTI, SAMEDIFF, THEOREM = range(7)

CHUNK = 250


def _metadata(name: str, config: ExperimentConfig, **extra) -> dict:
    meta = {"experiment": name, "seed": str(config.seed), "version": __version__}
    meta.update({k: str(v) for k, v in extra.items()})
    meta["config"] = emit_config(config).rstrip("\n")
    return meta


@dataclass(frozen=True)
class TrialDesign:
    """How each trial's model is chosen.

    With ``sigma_range`` set, ``sigma_s`` and every cue noise are redrawn
    per trial from ``U[low, high]``; otherwise the fixed values are used.
    """

    kind: str
    n_cues: int = 2
    prior_c1: float = 0.5
    sigma_s: float = 4.0
    sigmas: tuple[float, ...] = (6.0, 6.0)
    half_range: float = 10.0
    sigma_range: tuple[float, ...] = ()

    def model_for(self, rng: np.random.Generator):
        if self.sigma_range:
            lo, hi = self.sigma_range
            sigma_s = float(rng.uniform(lo, hi))
            sigmas = tuple(float(s) for s in rng.uniform(lo, hi, self.n_cues))
        else:
            sigma_s, sigmas = self.sigma_s, tuple(self.sigmas)
        if self.kind == "two-cue":
            return TwoCueModel(self.prior_c1, sigma_s, sigmas[0], sigmas[1])
        if self.kind == "multi-cue":
            return MultiCueModel(self.n_cues, sigmas, self.prior_c1, sigma_s)
        return SameDiffModel(self.n_cues, sigmas, self.prior_c1, self.half_range, sigma_s)


@dataclass
class TrialBlock:
    """Per-trial outcomes for one block of trials; ``p_hat`` is (trials, sizes)."""

    p_exact: np.ndarray
    true_cause: np.ndarray
    disparity: np.ndarray
    p_hat: np.ndarray
    n_common_draws: np.ndarray
    n_indicator: np.ndarray

    @classmethod
    def join(cls, blocks: Sequence["TrialBlock"]) -> "TrialBlock":
        return cls(*(np.concatenate([getattr(b, f) for b in blocks]) for f in cls.__dataclass_fields__))


def _indicator_count(model, samples) -> int:
    """Audit: rows whose stimuli are all equal (and in range), by value."""
    s = samples.stimuli
    equal = np.all(s == s[:, :1], axis=1)
    if isinstance(model, SameDiffModel):
        equal &= np.abs(s[:, 0]) <= model.half_range
    return int(np.count_nonzero(equal))


def _run_block(task) -> TrialBlock:
    design, seed, prefix, indices, sample_sizes, allocation = task
    T, K = len(indices), len(sample_sizes)
    p_exact = np.empty(T)
    true_cause = np.empty(T, dtype=np.int64)
    disparity = np.empty(T)
    p_hat = np.empty((T, K))
    n_common = np.zeros((T, K), dtype=np.int64)
    n_ind = np.zeros((T, K), dtype=np.int64)
    for row, i in enumerate(indices):
        gen = stream(seed, GEN, *prefix, i)
        model = design.model_for(gen)
        trial = sample_trial(model, gen)
        p_exact[row] = exact_posterior(model, trial.observations)
        true_cause[row] = int(trial.true_cause)
        disparity[row] = trial.stimuli[-1] - trial.stimuli[0]
        for k, n in enumerate(sample_sizes):
            samples = sample_prior_batch(model, n, stream(seed, EST, *prefix, i, n), allocation)
            p_hat[row, k] = estimate_from_samples(model, trial.observations, samples).p_c1
            n_common[row, k] = samples.n_common
            n_ind[row, k] = _indicator_count(model, samples)
    return TrialBlock(p_exact, true_cause, disparity, p_hat, n_common, n_ind)


def run_trials(
    design: TrialDesign,
    seed: int,
    prefix: tuple[int, ...],
    n_trials: int,
    sample_sizes: Sequence[int],
    allocation: str = "stratified",
    jobs: int = 1,
) -> TrialBlock:
    """Generate ``n_trials`` trials and estimate each at every sample size."""
    tasks = [
        (design, seed, tuple(prefix), list(r), tuple(sample_sizes), allocation)
        for r in chunked(n_trials, CHUNK)
    ]
    return TrialBlock.join(parallel_map(_run_block, tasks, jobs))


def _decisions(p) -> np.ndarray:
    """Vectorised :func:`decide`: 1 = common, 2 = separate (tie -> separate)."""
    return np.where(np.asarray(p) > 0.5, int(Cause.COMMON), int(Cause.SEPARATE))


@dataclass(frozen=True)
class ErrorSummary:
    mean_error: float
    errors: int
    error_rate: float
    error_lo: float
    error_hi: float
    truth_error_rate: float
    oracle_truth_error_rate: float


def summarize(block: TrialBlock, k: int) -> ErrorSummary:
    exact_dec = _decisions(block.p_exact)
    est_dec = _decisions(block.p_hat[:, k])
    n = len(exact_dec)
    errors = int(np.count_nonzero(est_dec != exact_dec))
    lo, hi = wilson_interval(errors, n)
    return ErrorSummary(
        mean_error=float(np.mean(np.abs(block.p_hat[:, k] - block.p_exact))),
        errors=errors,
        error_rate=errors / n,
        error_lo=lo,
        error_hi=hi,
        truth_error_rate=float(np.mean(est_dec != block.true_cause)),
        oracle_truth_error_rate=float(np.mean(exact_dec != block.true_cause)),
    )


def _design_from_config(config: ExperimentConfig, kind: str | None = None, n_cues: int | None = None) -> TrialDesign:
    kind = kind or config.kind
    if kind == "two-cue":
        sigmas = (config.sigma_1, config.sigma_2)
        n_cues = 2
    else:
        n_cues = n_cues or len(config.sigmas)
        sigmas = tuple(config.sigmas) if len(config.sigmas) == n_cues else (config.sigma_1,) * n_cues
    return TrialDesign(
        kind=kind,
        n_cues=n_cues,
        prior_c1=config.prior_c1,
        sigma_s=config.sigma_s,
        sigmas=sigmas,
        half_range=config.half_range,
        sigma_range=tuple(config.sigma_range),
    )


ERROR_COLUMNS = [
    "mean_error",
    "errors",
    "error_rate",
    "error_rate_lo",
    "error_rate_hi",
    "truth_error_rate",
    "oracle_truth_error_rate",
]


def _error_cells(s: ErrorSummary) -> list:
    return [s.mean_error, s.errors, s.error_rate, s.error_lo, s.error_hi, s.truth_error_rate, s.oracle_truth_error_rate]


# ---------------------------------------------------------------- experiment 1


def exp1_population(config: ExperimentConfig) -> ResultTable:
    """Per-neuron spike counts against normalised likelihoods.

    One row per neuron per trial (``config.n_trials`` trials). A silent pool
    is re-emitted with a fresh stream up to ``max_retries`` times.
    """
    model = config.model()
    table = ResultTable(
        ["trial", "neuron", "common", "expected_rate", "count", "normalized_rate", "normalized_likelihood"],
        metadata=_metadata("exp1", config, pool_size=config.pool_size, gain=config.gain),
    )
    for t in range(config.n_trials):
        trial = sample_trial(model, stream(config.seed, GEN, EXP1, t))
        pool = build_pool(model, config.pool_size, config.gain, stream(config.seed, POOL, EXP1, t))
        for attempt in range(config.max_retries + 1):
            try:
                response = emit_spikes(pool, trial.observations, stream(config.seed, SPIKE, EXP1, t, attempt))
                break
            except SilentPoolError:
                if attempt == config.max_retries:
                    raise
        expected = pool.tuning(trial.observations)
        lik = pool.likelihoods(trial.observations)
        norm_lik = lik / np.sum(lik)
        common = pool.preferred.from_common_cause
        for i in range(len(pool)):
            table.append(
                (t, i + 1, int(common[i]), expected[i], int(response.counts[i]), response.normalized[i], norm_lik[i])
            )
    return table


def strided(table: ResultTable, stride: int) -> ResultTable:
    """Neurons ``1, 1 + stride, 1 + 2 * stride, ...`` of every trial."""
    j = table.columns.index("neuron")
    rows = [r for r in table.rows if (r[j] - 1) % stride == 0]
    return ResultTable(list(table.columns), rows, dict(table.metadata))


def exp1_deviation(table: ResultTable) -> np.ndarray:
    """Per-trial mean ``|normalized_rate - normalized_likelihood|``."""
    trial = table.column("trial")
    dev = np.abs(table.column("normalized_rate") - table.column("normalized_likelihood"))
    return np.array([np.mean(dev[trial == t]) for t in np.unique(trial)])


# ---------------------------------------------------------------- experiment 2


def exp2_convergence(config: ExperimentConfig, jobs: int = 1) -> ResultTable:
    """Mean posterior error and error rate per repetition and sample size.

    Each repetition redraws both the trials and the estimator samples.
    """
    design = _design_from_config(config, "two-cue")
    table = ResultTable(
        ["repetition", "n_samples", "n_trials"] + ERROR_COLUMNS,
        metadata=_metadata("exp2", config),
    )
    for rep in range(config.repetitions):
        block = run_trials(design, config.seed, (EXP2, rep), config.n_trials, config.sample_sizes, config.allocation, jobs)
        for k, n in enumerate(config.sample_sizes):
            table.append([rep, n, config.n_trials] + _error_cells(summarize(block, k)))
    return table


def summarize_repetitions(table: ResultTable, by: Sequence[str]) -> ResultTable:
    """Collapse the ``repetition`` axis: means, extremes, pooled Wilson CI."""
    cols = list(by) + [
        "repetitions",
        "n_trials",
        "mean_error",
        "error_rate",
        "error_rate_min",
        "error_rate_max",
        "error_rate_lo",
        "error_rate_hi",
        "truth_error_rate",
        "oracle_truth_error_rate",
    ]
    out = ResultTable(cols, metadata=dict(table.metadata))
    keys = []
    for row in table.rows:
        key = tuple(row[table.columns.index(b)] for b in by)
        if key not in keys:
            keys.append(key)
    for key in keys:
        sub = table.where(**dict(zip(by, key)))
        trials = int(np.sum(sub.column("n_trials")))
        errors = int(np.sum(sub.column("errors")))
        lo, hi = wilson_interval(errors, trials)
        rates = sub.column("error_rate")
        out.append(
            list(key)
            + [
                len(sub),
                trials,
                float(np.mean(sub.column("mean_error"))),
                errors / trials,
                float(np.min(rates)),
                float(np.max(rates)),
                lo,
                hi,
                float(np.mean(sub.column("truth_error_rate"))),
                float(np.mean(sub.column("oracle_truth_error_rate"))),
            ]
        )
    return out


# ---------------------------------------------------------------- experiment 3


def sigma_grid_values(config: ExperimentConfig) -> np.ndarray:
    lo, hi, step = config.sigma_grid
    count = int(math.floor((hi - lo) / step + 1e-9)) + 1
    return lo + step * np.arange(count)


def exp3_sweep(config: ExperimentConfig, jobs: int = 1) -> ResultTable:
    """Error rate on a ``sigma_1 x sigma_2`` grid for each fixed ``sigma_s``.

    ``n_trials`` trials per cell, all sample sizes in ``sample_sizes``.
    """
    grid = sigma_grid_values(config)
    table = ResultTable(
        ["sigma_s", "sigma_1", "sigma_2", "n_samples", "n_trials"] + ERROR_COLUMNS,
        metadata=_metadata("exp3", config),
    )
    cells = [
        (a, b, c)
        for a in range(len(config.sigma_s_values))
        for b in range(len(grid))
        for c in range(len(grid))
    ]
    tasks = []
    for a, b, c in cells:
        design = TrialDesign(
            "two-cue",
            prior_c1=config.prior_c1,
            sigma_s=float(config.sigma_s_values[a]),
            sigmas=(float(grid[b]), float(grid[c])),
        )
        for r in chunked(config.n_trials, CHUNK):
            tasks.append((design, config.seed, (EXP3, a, b, c), list(r), tuple(config.sample_sizes), config.allocation))
    blocks = parallel_map(_run_block, tasks, jobs)
    per_cell = len(chunked(config.n_trials, CHUNK))
    for j, (a, b, c) in enumerate(cells):
        block = TrialBlock.join(blocks[j * per_cell : (j + 1) * per_cell])
        for k, n in enumerate(config.sample_sizes):
            table.append(
                [float(config.sigma_s_values[a]), float(grid[b]), float(grid[c]), n, config.n_trials]
                + _error_cells(summarize(block, k))
            )
    return table


# ---------------------------------------------------------------- experiment 4


def exp4_disparity(config: ExperimentConfig, jobs: int = 1) -> ResultTable:
    """Proportion of common-cause reports per stimulus-disparity bin.

    Bins are centred on multiples of ``disparity_bin_width``; bins holding
    fewer than ``min_bin_count`` trials are kept and flagged ``low_count``.
    """
    design = _design_from_config(config, "two-cue")
    block = run_trials(design, config.seed, (EXP4,), config.n_trials, config.sample_sizes, config.allocation, jobs)
    width = config.disparity_bin_width
    bins = np.round(block.disparity / width).astype(np.int64)
    oracle_common = _decisions(block.p_exact) == int(Cause.COMMON)
    est_common = _decisions(block.p_hat) == int(Cause.COMMON)
    table = ResultTable(
        ["disparity", "n_trials", "low_count", "p_common_oracle"]
        + [f"p_common_is_{n}" for n in config.sample_sizes],
        metadata=_metadata("exp4", config, bin_width=width, min_bin_count=config.min_bin_count),
    )
    for b in np.unique(bins):
        mask = bins == b
        count = int(np.count_nonzero(mask))
        table.append(
            [float(b * width), count, int(count < config.min_bin_count), float(np.mean(oracle_common[mask]))]
            + [float(v) for v in np.mean(est_common[mask], axis=0)]
        )
    return table


# -------------------------------------------------------- generalisations


def _error_vs_size(config: ExperimentConfig, kind: str, exp_tag: int, name: str, jobs: int) -> ResultTable:
    table = ResultTable(
        ["n_cues", "repetition", "n_samples", "n_trials"] + ERROR_COLUMNS + ["n_common_draws", "n_indicator"],
        metadata=_metadata(name, config),
    )
    for t in config.cue_counts:
        design = _design_from_config(config, kind, t)
        for rep in range(config.repetitions):
            block = run_trials(design, config.seed, (exp_tag, t, rep), config.n_trials, config.sample_sizes, config.allocation, jobs)
            for k, n in enumerate(config.sample_sizes):
                table.append(
                    [t, rep, n, config.n_trials]
                    + _error_cells(summarize(block, k))
                    + [int(np.sum(block.n_common_draws[:, k])), int(np.sum(block.n_indicator[:, k]))]
                )
    return table


def exp_multi(config: ExperimentConfig, jobs: int = 1) -> ResultTable:
    """Error rate against sample size for each cue count in ``cue_counts``."""
    return _error_vs_size(config, "multi-cue", MULTI, "multi", jobs)


def exp_samediff(config: ExperimentConfig, jobs: int = 1) -> ResultTable:
    """Same-different judgement error rate against sample size.

    ``n_common_draws`` counts common-branch samples by provenance and
    ``n_indicator`` counts samples whose values are all equal and inside
    ``[-L, L]``; the two must agree.
    """
    return _error_vs_size(config, "same-different", SAMEDIFF, "samediff", jobs)


def min_size_meeting(table: ResultTable, n_cues: int, threshold: float) -> int | None:
    """Smallest sample size whose repetition-averaged error rate is <= threshold."""
    summary = summarize_repetitions(table.where(n_cues=n_cues), ["n_cues", "n_samples"])
    for n, rate in zip(summary.column("n_samples"), summary.column("error_rate")):
        if rate <= threshold:
            return int(n)
    return None


# ------------------------------------------------------ convergence checks


def _theorem_obs(config: ExperimentConfig, model) -> list[np.ndarray]:
    if config.observations:
        return [np.asarray(config.observations, dtype=float)]
    return [sample_trial(model, stream(config.seed, OBS, THEOREM, i)).observations for i in range(config.n_trials)]


def _theorem_task(task):
    model, x, obs_index, reps, n, seed, allocation = task
    return np.array(
        [is_posterior(model, x, n, stream(seed, EST, THEOREM, obs_index, rep, n), allocation).p_c1 for rep in reps]
    )


def theorem1_check(config: ExperimentConfig, jobs: int = 1) -> ResultTable:
    """Coverage ``P(|p_hat - p| < eps)`` and error quantiles against N.

    The observation set is ``config.observations`` when given, otherwise
    ``n_trials`` vectors drawn from the model. Each observation is estimated
    ``repetitions`` times at every sample size.
    """
    model = config.model()
    obs = _theorem_obs(config, model)
    exact = [exact_posterior(model, x) for x in obs]
    tasks = [
        (model, x, j, list(r), n, config.seed, config.allocation)
        for n in config.sample_sizes
        for j, x in enumerate(obs)
        for r in chunked(config.repetitions, 100)
    ]
    results = parallel_map(_theorem_task, tasks, jobs)
    table = ResultTable(
        ["n_samples", "epsilon", "trials", "coverage", "coverage_lo", "coverage_hi", "mean_abs_error", "q50", "q90", "q99"],
        metadata=_metadata("theorem1", config, observations=len(obs)),
    )
    per_n = len(obs) * len(chunked(config.repetitions, 100))
    for k, n in enumerate(config.sample_sizes):
        parts = results[k * per_n : (k + 1) * per_n]
        chunks_per_obs = len(chunked(config.repetitions, 100))
        err = np.concatenate(
            [np.abs(parts[j * chunks_per_obs + c] - exact[j]) for j in range(len(obs)) for c in range(chunks_per_obs)]
        )
        q50, q90, q99 = np.quantile(err, [0.5, 0.9, 0.99])
        for eps in config.epsilons:
            hits = int(np.count_nonzero(err < eps))
            lo, hi = wilson_interval(hits, len(err))
            table.append([n, eps, len(err), hits / len(err), lo, hi, float(np.mean(err)), q50, q90, q99])
    return table


def loglog_slope(sizes, errors) -> float:
    """Least-squares slope of ``log(error)`` against ``log(N)``."""
    slope, _ = np.polyfit(np.log(np.asarray(sizes, float)), np.log(np.asarray(errors, float)), 1)
    return float(slope)


class LemmaPreconditionError(ValueError):
    pass


def parse_distribution(spec: str):
    """``"name:a,b,..."`` -> frozen ``scipy.stats`` distribution ``name(a, b, ...)``."""
    name, _, args = spec.partition(":")
    dist = getattr(scipy.stats, name.strip(), None)
    if not isinstance(dist, (scipy.stats.rv_continuous, scipy.stats.rv_discrete)):
        raise ValueError(f"unknown distribution {name!r}")
    params = [float(a) for a in args.split(",") if a.strip()]
    return dist(*params)


def lemma1_bound(n, eps, mu1, mu2, var1, var2) -> float:
    return 1.0 - 16.0 * var1 / (n * mu2**2 * eps**2) - 16.0 * mu1**2 * var2 / (n * mu2**4 * eps**2)


def lemma2_bound(n, eps, mu1, var1) -> float:
    return 1.0 - var1 / (n * mu1**2 * eps**2)


def lemma1_check(config: ExperimentConfig, min_mean: float = 1e-6) -> ResultTable:
    """Empirical coverage of the ratio-of-sums and reciprocal-mean events.

    ``lemma = 1``: ``|sum X / sum Y - mu1 / mu2| < eps``.
    ``lemma = 2``: ``|1 / mean X - 1 / mu1| < eps``.
    Each ``(N, eps)`` cell uses ``repetitions`` independent replications;
    ``bound`` is the guaranteed lower bound clipped to ``[0, 1]``.
    """
    dx = parse_distribution(config.x_distribution)
    dy = dx if config.paired else parse_distribution(config.y_distribution)
    mu1, var1 = float(dx.mean()), float(dx.var())
    mu2, var2 = float(dy.mean()), float(dy.var())
    for name, mu in (("mu1", mu1), ("mu2", mu2)):
        if not abs(mu) > min_mean:
            raise LemmaPreconditionError(f"{name} = {mu:g} is too close to zero")
    table = ResultTable(
        ["lemma", "n", "epsilon", "repetitions", "frequency", "bound", "raw_bound", "holds"],
        metadata=_metadata("lemma1", config, mu1=mu1, mu2=mu2, var1=var1, var2=var2),
    )
    reps = config.repetitions
    for i, n in enumerate(config.lemma_sample_sizes):
        sx = np.empty(reps)
        sy = np.empty(reps)
        for r in chunked(reps, max(1, 2_000_000 // n)):
            x = dx.rvs(size=(len(r), n), random_state=stream(config.seed, LEMMA_X, i, r.start))
            sx[r.start : r.stop] = np.sum(x, axis=1)
            if config.paired:
                sy[r.start : r.stop] = sx[r.start : r.stop]
            else:
                y = dy.rvs(size=(len(r), n), random_state=stream(config.seed, LEMMA_Y, i, r.start))
                sy[r.start : r.stop] = np.sum(y, axis=1)
        ratio_dev = np.abs(sx / sy - mu1 / mu2)
        recip_dev = np.abs(n / sx - 1.0 / mu1)
        for eps in config.lemma_epsilons:
            for lemma, dev, raw in (
                (1, ratio_dev, lemma1_bound(n, eps, mu1, mu2, var1, var2)),
                (2, recip_dev, lemma2_bound(n, eps, mu1, var1)),
            ):
                freq = float(np.mean(dev < eps))
                bound = min(1.0, max(0.0, raw))
                table.append([lemma, n, eps, reps, freq, bound, raw, int(freq >= bound)])
    return table


# ------------------------------------------------------- single inferences


def infer_table(config: ExperimentConfig) -> ResultTable:
    model = config.model()
    est = is_posterior(model, config.observations, config.n_samples, stream(config.seed, EST), config.allocation)
    table = ResultTable(
        ["p_c1", "n_samples", "decision", "sum_common_weight", "sum_total_weight", "log_shift"],
        metadata=_metadata("infer", config),
    )
    table.append([est.p_c1, est.n_samples, int(est.decision), est.sum_common_weight, est.sum_total_weight, est.log_shift])
    return table


def exact_table(config: ExperimentConfig) -> ResultTable:
    p = exact_posterior(config.model(), config.observations)
    table = ResultTable(["p_c1", "decision"], metadata=_metadata("exact", config))
    table.append([p, int(decide(p))])
    return table
