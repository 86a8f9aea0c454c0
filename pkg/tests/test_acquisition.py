"""Tests for the LCB/EI acquisition values and incumbent rules."""

import numpy as np
import pytest

from madapt import acquisition as acq
from madapt import gp
from madapt.errors import ContractViolationError

# Standard normal pdf at zero, frozen from mpmath: 1/sqrt(2*pi).
PHI_AT_0 = 0.3989422804014327


class TestLCB:
    def test_zero_beta_reduces_to_mean(self):
        assert acq.lcb(3.0, 0.5, 0.0) == 3.0

    def test_direct_substitution(self):
        assert acq.lcb(3.0, 0.5, 2.0) == pytest.approx(2.0)

    def test_never_exceeds_mean(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            m = rng.standard_normal() * 10
            s = rng.random() * 5
            b = rng.random() * 4
            assert acq.lcb(m, s, b) <= m

    def test_affine_in_each_argument(self):
        m, s, b = 1.3, 0.7, 2.1
        base = acq.lcb(m, s, b)
        assert acq.lcb(m + 1.0, s, b) == pytest.approx(base + 1.0)
        assert acq.lcb(m, s + 0.5, b) == pytest.approx(base - 0.5 * b)
        assert acq.lcb(m, s, b + 1.0) == pytest.approx(base - s)


class TestEI:
    def test_vanishing_std_no_improvement(self):
        incumbent = 2.0
        assert acq.ei(incumbent + 1.0, 0.0, incumbent) == 0.0

    def test_vanishing_std_deterministic_improvement(self):
        incumbent = 2.0
        assert acq.ei(incumbent - 1.0, 0.0, incumbent) == pytest.approx(-1.0)

    def test_mean_at_incumbent_unit_std(self):
        assert acq.ei(1.5, 1.0, 1.5) == pytest.approx(-PHI_AT_0, rel=1e-12)

    def test_nonpositive_everywhere(self):
        rng = np.random.default_rng(1)
        for _ in range(300):
            m = rng.standard_normal() * 5
            s = rng.random() * 3 + 1e-9
            f = rng.standard_normal() * 5
            assert acq.ei(m, s, f) <= 0.0

    def test_magnitude_grows_with_std_at_incumbent_mean(self):
        f = 0.7
        values = [acq.ei(f, s, f) for s in (0.1, 0.5, 1.0, 2.0)]
        for a, b in zip(values, values[1:]):
            assert b < a

    def test_finite_over_wide_standardized_range(self):
        # z = (incumbent - mean)/std in [-40, 40]; no NaN from tail underflow.
        for z in np.linspace(-40, 40, 161):
            val = acq.ei(-z, 1.0, 0.0)
            assert np.isfinite(val)
            assert val <= 0.0

    def test_gradient_terms_match_finite_differences(self):
        h = 1e-7
        for m, s, f in [(0.3, 0.8, 0.5), (-1.0, 2.0, 0.0), (1.0, 0.4, 1.0)]:
            dmu, dsigma = acq.ei_grad_terms(m, s, f)
            fd_mu = (acq.ei(m + h, s, f) - acq.ei(m - h, s, f)) / (2 * h)
            fd_sigma = (acq.ei(m, s + h, f) - acq.ei(m, s - h, f)) / (2 * h)
            assert dmu == pytest.approx(fd_mu, abs=1e-6)
            assert dsigma == pytest.approx(fd_sigma, abs=1e-6)


class TestIncumbent:
    def test_min_observation(self):
        assert acq.incumbent([3.0, 1.0, 2.0], rule=acq.MIN_OBSERVATION) == 1.0

    def test_empty_dataset_rejected(self):
        with pytest.raises(ContractViolationError):
            acq.incumbent([], rule=acq.MIN_OBSERVATION)

    def test_constant_data_posterior_mean_rule(self):
        U = np.array([[0.2], [0.8]])
        y = np.array([5.0, 5.0])
        model = gp.fit(U, y, gp.FitOptions(noise_fixed=True, noise_std=0.0))
        val = acq.incumbent(y, gp=model, rule=acq.MIN_POSTERIOR_MEAN)
        assert val == pytest.approx(5.0, abs=1e-3)

    def test_posterior_mean_rule_smooths_noise_spikes(self):
        # On noisy quadratic data the smoothed incumbent should sit above the
        # raw minimum in the vast majority of trials.
        wins = 0
        trials = 100
        for seed in range(trials):
            rng = np.random.default_rng(seed)
            U = rng.random((20, 1))
            y = (U[:, 0] - 0.4) ** 2 + 0.1 * rng.standard_normal(20)
            model = gp.fit(U, y, gp.FitOptions(seed=seed))
            smooth = acq.incumbent(y, gp=model, rule=acq.MIN_POSTERIOR_MEAN)
            raw = acq.incumbent(y, rule=acq.MIN_OBSERVATION)
            if smooth >= raw:
                wins += 1
        assert wins >= 90

    def test_explicit_means_override(self):
        val = acq.incumbent(
            [9.0, 9.0], rule=acq.MIN_POSTERIOR_MEAN,
            means_at_observed=[4.0, 6.0],
        )
        assert val == 4.0


class TestAcquisitionSpec:
    def test_validation(self):
        with pytest.raises(ContractViolationError):
            acq.AcquisitionSpec(kind="thompson")
        with pytest.raises(ContractViolationError):
            acq.AcquisitionSpec(kind=acq.LCB, beta=-0.1)
        with pytest.raises(ContractViolationError):
            acq.AcquisitionSpec(incumbent_rule="median")
        spec = acq.AcquisitionSpec(kind=acq.LCB, beta=3.0)
        assert spec.beta == 3.0
