import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cuesample.models import (
    Cause,
    ModelError,
    MultiCueModel,
    SameDiffModel,
    TwoCueModel,
    log_likelihood,
    make_model,
    sample_prior_batch,
    sample_prior_stimuli,
    sample_trial,
)

ALMOST_ONE = 1 - 1e-12


class TestMakeModel:
    def test_two_cue(self):
        m = make_model("two-cue", prior_c1=0.5, sigma_s=4, sigma_1=6, sigma_2=6)
        assert m.n_cues == 2
        assert m.sigmas == (6, 6)

    def test_zero_noise_rejected(self):
        with pytest.raises(ModelError, match="sigma_1"):
            make_model("two-cue", sigma_1=0)

    def test_same_different(self, rng):
        sig = tuple(rng.uniform(1, 3, 3))
        m = make_model("same-different", n_objects=3, sigmas=sig, half_range=10, sigma_s=float(rng.uniform(1, 3)))
        assert m.n_cues == 3 and m.half_range == 10

    @pytest.mark.parametrize(
        "kind, params",
        [
            ("two-cue", dict(prior_c1=0.0)),
            ("two-cue", dict(prior_c1=1.0)),
            ("two-cue", dict(sigma_s=-1.0)),
            ("multi-cue", dict(n_cues=1, sigmas=(1.0,))),
            ("multi-cue", dict(n_cues=3, sigmas=(1.0, 2.0))),
            ("multi-cue", dict(n_cues=2, sigmas=(1.0, -2.0))),
            ("same-different", dict(n_objects=2, sigmas=(1.0, 1.0), half_range=0.0)),
            ("same-different", dict(n_objects=3, sigmas=(1.0, 1.0))),
            ("nonsense", dict()),
        ],
    )
    def test_invalid(self, kind, params):
        with pytest.raises(ModelError):
            make_model(kind, **params)


class TestSamplePrior:
    def test_prior_limit_forces_common(self, rng):
        m = TwoCueModel(prior_c1=ALMOST_ONE)
        batch = sample_prior_batch(m, 100_000, rng)
        common = batch.from_common_cause
        equal = batch.stimuli[:, 0] == batch.stimuli[:, 1]
        assert np.mean(common & equal) >= 0.9999

    def test_degenerate_spread(self, rng):
        m = TwoCueModel(prior_c1=1e-12, sigma_s=1e-12)
        s = sample_prior_stimuli(m, rng)
        assert not s.from_common_cause
        np.testing.assert_allclose(s.stimuli, 0.0, atol=1e-9)

    def test_mixture_moments(self, rng):
        # Var(S_1) = sigma_s^2 in both branches.
        batch = sample_prior_batch(TwoCueModel(0.5, 4.0, 6.0, 6.0), 100_000, rng)
        assert abs(np.mean(batch.from_common_cause) - 0.5) <= 0.01
        assert abs(np.var(batch.stimuli[:, 0], ddof=1) - 16.0) <= 0.5

    @pytest.mark.parametrize("allocation", ["iid", "stratified"])
    def test_provenance_matches_equality(self, rng, allocation):
        for m in (TwoCueModel(), MultiCueModel(5, (1, 2, 3, 4, 5)), SameDiffModel(4, (1, 1, 2, 2))):
            batch = sample_prior_batch(m, 5000, rng, allocation)
            equal = np.all(batch.stimuli == batch.stimuli[:, :1], axis=1)
            np.testing.assert_array_equal(equal, batch.from_common_cause)

    def test_same_different_shared_value(self, rng):
        m = SameDiffModel(3, (1.0, 2.0, 3.0), half_range=10.0, sigma_s=2.0)
        batch = sample_prior_batch(m, 20_000, rng)
        common = batch.from_common_cause
        np.testing.assert_array_equal(batch.stimuli[common, 0], batch.mu[common])
        assert np.all(np.abs(batch.mu[common]) <= 10.0)
        assert np.all(np.isnan(batch.mu[~common]))
        one = batch[int(np.flatnonzero(common)[0])]
        assert one.mu == one.stimuli[0]
        assert batch[int(np.flatnonzero(~common)[0])].mu is None

    def test_same_different_separate_spread(self, rng):
        # S_i = mu_i + N(0, sigma_s^2), mu_i ~ U[-L, L]: Var = L^2 / 3 + sigma_s^2
        m = SameDiffModel(2, (1.0, 1.0), prior_c1=1e-12, half_range=10.0, sigma_s=2.0)
        s = sample_prior_batch(m, 200_000, rng).stimuli
        assert abs(np.var(s) - (100 / 3 + 4)) < 0.5

    def test_stratified_counts(self, rng):
        m = TwoCueModel(prior_c1=0.3)
        counts = [sample_prior_batch(m, 1000, rng, "stratified").n_common for _ in range(50)]
        assert set(counts) <= {300}
        counts = [sample_prior_batch(m, 15, rng, "stratified").n_common for _ in range(2000)]
        assert set(counts) == {4, 5}
        assert abs(np.mean(counts) - 4.5) < 0.05


class TestSampleTrial:
    def test_prior_limit(self, rng):
        m = TwoCueModel(prior_c1=ALMOST_ONE)
        for _ in range(1000):
            t = sample_trial(m, rng)
            assert t.true_cause is Cause.COMMON
            assert t.stimuli[0] == t.stimuli[1]

    def test_noiseless_channel(self, rng):
        m = TwoCueModel(sigma_1=1e-12, sigma_2=1e-12)
        for _ in range(100):
            t = sample_trial(m, rng)
            np.testing.assert_allclose(t.observations, t.stimuli, rtol=0, atol=1e-9)

    def test_total_variance(self, rng):
        m = TwoCueModel(0.5, 4.0, 6.0, 6.0)
        x = np.array([sample_trial(m, rng).observations for _ in range(100_000)])
        # sigma_s^2 + sigma_1^2 = 52; mean 0 within 3 standard errors
        assert abs(np.var(x[:, 0], ddof=1) - 52.0) <= 1.5
        assert abs(np.mean(x[:, 0])) < 3 * math.sqrt(52 / 100_000)

    def test_shapes(self, rng):
        for m in (TwoCueModel(), MultiCueModel(10, (2.0,) * 10), SameDiffModel(3, (1.0, 2.0, 3.0))):
            t = sample_trial(m, rng)
            assert t.stimuli.shape == t.observations.shape == (m.n_cues,)


class TestLogLikelihood:
    def test_peak_of_unit_gaussians(self):
        m = TwoCueModel(sigma_1=1.0, sigma_2=1.0)
        assert log_likelihood(m, [0.3, -2.0], [0.3, -2.0]) == pytest.approx(math.log(1 / (2 * math.pi)), abs=1e-12)
        assert log_likelihood(m, [0.3, -2.0], [0.3, -2.0]) == pytest.approx(-1.8379, abs=5e-5)

    def test_one_sigma_offset(self):
        m = TwoCueModel(sigma_1=6.0, sigma_2=1.0)
        mp = mpmath.mp
        mp.dps = 40
        term1 = mpmath.log(mpmath.npdf(6, 0, 6))
        term2 = mpmath.log(mpmath.npdf(0, 0, 1))
        total = log_likelihood(m, [0.0, 0.0], [6.0, 0.0])
        assert total == pytest.approx(float(term1 + term2), abs=1e-12)
        assert total - float(term2) == pytest.approx(-3.2107, abs=5e-5)

    @given(
        s=st.lists(st.floats(-50, 50), min_size=3, max_size=3),
        x=st.lists(st.floats(-50, 50), min_size=3, max_size=3),
        shift=st.floats(-100, 100),
    )
    def test_translation_invariance(self, s, x, shift):
        m = MultiCueModel(3, (1.0, 3.0, 7.0))
        a = log_likelihood(m, s, x)
        b = log_likelihood(m, np.add(s, shift), np.add(x, shift))
        assert b == pytest.approx(a, rel=1e-9, abs=1e-9)

    def test_vectorised_rows(self, rng):
        m = MultiCueModel(4, (1.0, 2.0, 3.0, 4.0))
        s = rng.normal(size=(7, 4))
        x = rng.normal(size=4)
        rows = log_likelihood(m, s, x)
        assert rows.shape == (7,)
        np.testing.assert_allclose(rows, [log_likelihood(m, r, x) for r in s])

    def test_length_mismatch(self):
        with pytest.raises(ModelError):
            log_likelihood(TwoCueModel(), [0.0, 0.0, 0.0], [0.0, 0.0])

    @settings(max_examples=25)
    @given(s1=st.floats(-10, 10), s2=st.floats(-10, 10), x2=st.floats(-10, 10), sigma=st.floats(0.5, 8))
    def test_normalised_slice(self, s1, s2, x2, sigma):
        # Integrate exp(loglik) over x_1 with x_2 fixed; equals N(x2; s2, 1).
        m = TwoCueModel(sigma_1=sigma, sigma_2=1.0)
        grid = np.linspace(s1 - 12 * sigma, s1 + 12 * sigma, 20001)
        x = np.column_stack([grid, np.full_like(grid, x2)])
        dens = np.exp(log_likelihood(m, np.array([s1, s2]), x))
        marginal = np.trapezoid(dens, grid) if hasattr(np, "trapezoid") else np.trapz(dens, grid)
        expected = math.exp(-0.5 * (x2 - s2) ** 2) / math.sqrt(2 * math.pi)
        assert marginal == pytest.approx(expected, abs=1e-6)
