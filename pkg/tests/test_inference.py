import math

import numpy as np
import pytest
from scipy.stats import gamma, kstest, norm

from spartanbo.inference import (LogNormalPrior, PriorSpec,
                                 log_posterior_density, sample_ensemble,
                                 slice_step)
from spartanbo.kernels import ArdParams, SpartanParams
from spartanbo.surrogate import Dataset, log_marginal_likelihood


def _chain(log_density, x0, n, seed, width=1.0):
    rng = np.random.default_rng(seed)
    z = np.atleast_1d(np.asarray(x0, dtype=float))
    out = np.empty(n)
    for i in range(n):
        z = slice_step(z, log_density, rng, width)
        out[i] = z[0]
    return out


class TestSliceStep:
    def test_standard_normal_target(self):
        xs = _chain(lambda z: -0.5 * z[0] ** 2, 0.0, 5000, seed=0)
        assert kstest(xs[::5], norm.cdf).pvalue > 0.05

    def test_gamma_target(self):
        # shape 3 scale 1, sampled in the original coordinates
        def logp(z):
            return 2.0 * math.log(z[0]) - z[0] if z[0] > 0 else -math.inf
        xs = _chain(logp, 3.0, 6000, seed=1, width=2.0)
        assert kstest(xs[::6], gamma(3).cdf).pvalue > 0.05

    def test_deterministic_given_rng(self):
        logp = lambda z: -0.5 * float(z @ z)
        r1 = np.random.default_rng(5)
        r2 = np.random.default_rng(5)
        z1 = slice_step(np.zeros(3), logp, r1)
        z2 = slice_step(np.zeros(3), logp, r2)
        assert np.array_equal(z1, z2)

    def test_rejects_infinite_start(self):
        with pytest.raises(ValueError):
            slice_step(np.array([0.0]), lambda z: -math.inf, np.random.default_rng(0))

    def test_respects_bounded_support(self):
        def logp(z):
            return 0.0 if 0.0 < z[0] < 1.0 else -math.inf
        xs = _chain(logp, 0.5, 2000, seed=2)
        assert np.all((xs > 0) & (xs < 1))
        assert kstest(xs[::4], "uniform").pvalue > 0.01


class TestLogPosteriorDensity:
    @pytest.fixture
    def data(self):
        rng = np.random.default_rng(3)
        return Dataset(rng.random((8, 2)), rng.normal(size=8))

    def test_equals_lml_plus_prior(self, data):
        priors = PriorSpec()
        p = ArdParams([0.4, 0.6], 1.3)
        lml = log_marginal_likelihood(data, p, "matern52", 1e-6)
        prior = (priors.lengthscale.log_density_z(math.log(0.4))
                 + priors.lengthscale.log_density_z(math.log(0.6))
                 + priors.signal_variance.log_density_z(math.log(1.3)))
        got = log_posterior_density(p, data, priors, "matern52", 1e-6)
        assert got == pytest.approx(lml + prior, abs=1e-8)

    def test_spartan_position_outside_unit_cube(self):
        # rejected at construction, before any density is evaluated
        with pytest.raises(ValueError):
            SpartanParams(ArdParams([0.1, 0.1], 1.0),
                          ArdParams([0.5, 0.5], 1.0), [0.5, 1.5])

    def test_density_ratio_oracle(self, data):
        # prior terms cancel in a ratio when only the data changes
        priors = PriorSpec()
        p = ArdParams([0.3, 0.3], 1.0)
        d2 = Dataset(data.X[:4], data.y[:4])
        a = log_posterior_density(p, data, priors, "matern52", 1e-6)
        b = log_posterior_density(p, d2, priors, "matern52", 1e-6)
        expect = (log_marginal_likelihood(data, p, "matern52", 1e-6)
                  - log_marginal_likelihood(d2, p, "matern52", 1e-6))
        assert a - b == pytest.approx(expect, abs=1e-8)


class TestSampleEnsemble:
    @pytest.fixture
    def data1d(self):
        # short-lengthscale function observed densely enough to identify it
        rng = np.random.default_rng(4)
        X = rng.random((50, 1))
        y = np.sin(X[:, 0] * 2 * np.pi / 0.35)
        return Dataset(X, y)

    def test_shapes_and_determinism(self):
        rng = np.random.default_rng(0)
        data = Dataset(np.random.default_rng(1).random((6, 2)),
                       np.random.default_rng(2).normal(size=6))
        ens = sample_ensemble(data, PriorSpec(), m=4, burn_in=10, rng=rng)
        assert len(ens.samples) == 4 and ens.m == 4
        ens2 = sample_ensemble(data, PriorSpec(), m=4, burn_in=10,
                               rng=np.random.default_rng(0))
        for a, b in zip(ens.samples, ens2.samples):
            assert np.array_equal(a.params.lengthscales, b.params.lengthscales)
        assert not ens.warning

    def test_lengthscale_recovery(self, data1d):
        ens = sample_ensemble(data1d, PriorSpec(), m=10, burn_in=100,
                              rng=np.random.default_rng(7))
        ls = np.median([s.params.lengthscales[0] for s in ens.samples])
        assert 0.01 < ls < 0.3

    def test_warm_start_consistency(self, data1d):
        # a chain continued from a converged state should sample the same
        # lengthscale distribution as a long cold chain
        cold = sample_ensemble(data1d, PriorSpec(), m=30, burn_in=200,
                               rng=np.random.default_rng(8))
        seed_run = sample_ensemble(data1d, PriorSpec(), m=1, burn_in=150,
                                   rng=np.random.default_rng(9))
        warm = sample_ensemble(data1d, PriorSpec(), m=30, burn_in=50,
                               rng=np.random.default_rng(10),
                               init=seed_run.final_state)
        a = np.log([s.params.lengthscales[0] for s in cold.samples])
        b = np.log([s.params.lengthscales[0] for s in warm.samples])
        assert abs(np.median(a) - np.median(b)) < 1.0

    def test_spartan_positions_in_unit_interval(self):
        rng = np.random.default_rng(11)
        data = Dataset(rng.random((12, 2)), rng.normal(size=12))
        ens = sample_ensemble(data, PriorSpec(), m=6, burn_in=20,
                              rng=rng, kernel="spartan")
        for s in ens.samples:
            assert np.all(s.params.pos >= 0.0) and np.all(s.params.pos <= 1.0)

    def test_empty_data_samples_prior(self):
        prior = PriorSpec()
        ens = sample_ensemble(Dataset.empty(2), prior, m=200, burn_in=5,
                              rng=np.random.default_rng(12))
        zs = np.log([s.params.lengthscales[0] for s in ens.samples])
        # thin heavily; consecutive slice states are correlated
        assert kstest(zs[::10], norm(math.log(0.5), 1.0).cdf).pvalue > 0.01

    def test_m_validation(self):
        with pytest.raises(ValueError):
            sample_ensemble(Dataset.empty(1), PriorSpec(), m=0)


class TestLogNormalPrior:
    def test_density_is_normal_in_log_space(self):
        pr = LogNormalPrior(0.5, 1.0)
        z = 0.3
        assert pr.log_density_z(z) == pytest.approx(
            norm(math.log(0.5), 1.0).logpdf(z), abs=1e-12)

    def test_sample_moments(self):
        pr = LogNormalPrior(2.0, 0.5)
        zs = pr.sample_z(np.random.default_rng(0), size=20000)
        assert np.mean(zs) == pytest.approx(math.log(2.0), abs=0.02)
        assert np.std(zs) == pytest.approx(0.5, abs=0.02)
