import math
import time

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import multivariate_normal, norm

from cuesample.models import Cause, ModelError, MultiCueModel, SameDiffModel, TwoCueModel
from cuesample.oracle import (
    QuadratureSpec,
    decide,
    exact_posterior,
    log_marginals,
    log_ndtr_diff,
    quadrature_posterior,
)

# sqrt(det) of the two 2x2 marginal covariances at sigma_s=4, sigma=6:
# C=1: [[52, 16], [16, 52]] -> det 2448 ; C=2: diag(52, 52) -> det 2704.
EXP1_AT_ORIGIN = math.sqrt(2704) / (math.sqrt(2704) + math.sqrt(2448))


class TestExactPosterior:
    def test_origin_value(self, exp1_model):
        p = exact_posterior(exp1_model, [0.0, 0.0])
        assert p == pytest.approx(EXP1_AT_ORIGIN, abs=1e-14)
        assert p == pytest.approx(0.5124, abs=5e-5)

    def test_against_dense_gaussians(self, rng):
        for _ in range(20):
            ss, s1, s2 = rng.uniform(1, 8, 3)
            prior = rng.uniform(0.1, 0.9)
            x = rng.uniform(-20, 20, 2)
            cov1 = np.full((2, 2), ss**2) + np.diag([s1**2, s2**2])
            cov2 = np.diag([ss**2 + s1**2, ss**2 + s2**2])
            l1 = multivariate_normal(np.zeros(2), cov1).pdf(x)
            l2 = multivariate_normal(np.zeros(2), cov2).pdf(x)
            expected = prior * l1 / (prior * l1 + (1 - prior) * l2)
            got = exact_posterior(TwoCueModel(prior, ss, s1, s2), x)
            assert got == pytest.approx(expected, rel=1e-10, abs=1e-14)

    def test_multi_cue_dense(self, rng):
        sig = rng.uniform(1, 5, 6)
        m = MultiCueModel(6, tuple(sig), prior_c1=0.3, sigma_s=3.0)
        x = rng.normal(0, 4, 6)
        cov1 = np.full((6, 6), 9.0) + np.diag(sig**2)
        l1, l2 = log_marginals(m, x)
        assert l1 == pytest.approx(multivariate_normal(np.zeros(6), cov1).logpdf(x), rel=1e-12)
        assert l2 == pytest.approx(np.sum(norm.logpdf(x, 0, np.sqrt(9 + sig**2))), rel=1e-12)

    def test_prior_dominance(self, rng):
        m = TwoCueModel(prior_c1=1 - 1e-12)
        for x in rng.uniform(-5, 5, (20, 2)):
            assert exact_posterior(m, x) == pytest.approx(1.0, abs=1e-6)

    @given(x1=st.floats(-30, 30), x2=st.floats(-30, 30), s=st.floats(0.5, 10))
    def test_exchange_symmetry(self, x1, x2, s):
        m = TwoCueModel(0.5, 4.0, s, s)
        assert exact_posterior(m, [x1, x2]) == pytest.approx(exact_posterior(m, [x2, x1]), rel=1e-12, abs=1e-300)

    def test_monotone_in_disparity(self):
        m = TwoCueModel(0.5, 4.0, 6.0, 6.0)
        for centre in (-5.0, 0.0, 3.0):
            d = np.linspace(0, 40, 81)
            p = exact_posterior(m, np.column_stack([centre - d / 2, centre + d / 2]))
            assert np.all(np.diff(p) < 0)

    def test_no_nan_far_out(self, rng):
        for m in (TwoCueModel(0.5, 4.0, 6.0, 6.0), SameDiffModel(3, (1.0, 1.0, 1.0), half_range=10.0, sigma_s=1.0)):
            tot = math.sqrt(m.sigma_s**2 + max(m.sigmas) ** 2)
            x = rng.uniform(-10 * tot, 10 * tot, (2000, m.n_cues))
            if isinstance(m, SameDiffModel):
                x = x + np.sign(x) * m.half_range
            p = exact_posterior(m, x)
            assert np.all(np.isfinite(p))
            assert np.all((p >= 0) & (p <= 1))

    def test_shape_mismatch(self):
        with pytest.raises(ModelError):
            exact_posterior(TwoCueModel(), [1.0, 2.0, 3.0])


class TestLogNdtrDiff:
    def test_matches_direct(self):
        lo = np.array([-3.0, -1.0, 0.5, 2.0])
        hi = np.array([-1.0, 1.0, 2.0, 5.0])
        np.testing.assert_allclose(np.exp(log_ndtr_diff(lo, hi)), norm.cdf(hi) - norm.cdf(lo), rtol=1e-12)

    def test_far_tails(self):
        # Upper tail: direct differencing gives 0, the reflected form does not.
        got = log_ndtr_diff(40.0, 41.0)
        assert np.isfinite(got)
        assert got == pytest.approx(norm.logsf(40.0), rel=1e-6)
        assert log_ndtr_diff(-41.0, -40.0) == pytest.approx(got, rel=1e-12)


class TestQuadrature:
    def test_oracle_soundness_two_cue(self, rng):
        worst = 0.0
        for _ in range(100):
            ss, s1, s2 = rng.uniform(1, 8, 3)
            m = TwoCueModel(float(rng.uniform(0.1, 0.9)), ss, s1, s2)
            x = rng.uniform(-20, 20, 2)
            worst = max(worst, abs(exact_posterior(m, x) - quadrature_posterior(m, x)))
        assert worst < 1e-6

    def test_multi_cue(self, rng):
        m = MultiCueModel(10, tuple(rng.uniform(3, 7, 10)), sigma_s=4.0)
        x = rng.normal(0, 6, 10)
        assert quadrature_posterior(m, x) == pytest.approx(exact_posterior(m, x), abs=1e-6)

    def test_same_different_two_objects(self, rng):
        for _ in range(10):
            m = SameDiffModel(2, tuple(rng.uniform(1, 3, 2)), half_range=10.0, sigma_s=float(rng.uniform(1, 3)))
            x = rng.uniform(-14, 14, 2)
            assert quadrature_posterior(m, x) == pytest.approx(exact_posterior(m, x), abs=1e-6)

    def test_wider_grid_is_stable(self, rng):
        m = TwoCueModel(0.5, 4.0, 6.0, 6.0)
        for x in rng.uniform(-20, 20, (10, 2)):
            a = quadrature_posterior(m, x, QuadratureSpec(grid_half_width=8.0))
            b = quadrature_posterior(m, x, QuadratureSpec(grid_half_width=12.0, points_per_dim=1501))
            assert abs(a - b) < 1e-8

    def test_cost_guard(self):
        m = SameDiffModel(4, (1.0, 1.0, 1.0, 1.0))
        with pytest.raises(ModelError, match="cost guard"):
            quadrature_posterior(m, [0.0, 0.0, 0.0, 0.0])

    @pytest.mark.parametrize("points", [100, 1000, 51])
    def test_spec_validation(self, points):
        with pytest.raises(ValueError):
            QuadratureSpec(points_per_dim=points)

    @settings(max_examples=30, deadline=None)
    @given(
        sigmas=st.tuples(st.floats(1, 8), st.floats(1, 8), st.floats(1, 8)),
        x=st.tuples(st.floats(-20, 20), st.floats(-20, 20)),
    )
    def test_agreement_property(self, sigmas, x):
        m = TwoCueModel(0.5, *sigmas)
        assert abs(exact_posterior(m, x) - quadrature_posterior(m, x)) < 1e-6


def test_oracle_runtime_budget(rng):
    start = time.perf_counter()
    for _ in range(50):
        m = SameDiffModel(3, tuple(rng.uniform(1, 3, 3)), half_range=10.0, sigma_s=float(rng.uniform(1, 3)))
        x = rng.uniform(-12, 12, 3)
        assert abs(exact_posterior(m, x) - quadrature_posterior(m, x)) < 1e-6
    assert time.perf_counter() - start < 10.0


class TestDecide:
    @pytest.mark.parametrize("p, expected", [(0.51, Cause.COMMON), (0.5, Cause.SEPARATE), (0.49, Cause.SEPARATE)])
    def test_threshold(self, p, expected):
        assert decide(p) is expected

    def test_custom_threshold(self):
        assert decide(0.3, threshold=0.25) is Cause.COMMON
