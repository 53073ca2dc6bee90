import math

import numpy as np
import pytest

from bcmtrend.blinded import BlindedMethod
from bcmtrend.constant import (
    ConstBlindedFit,
    ConstParams,
    fit_const_blinded,
    fit_const_unblinded,
    info_const,
    info_const_blinded,
)
from bcmtrend.core import AllocationWeights, Group, ModelParams, cumulative_rate, rate
from bcmtrend.errors import BoundaryError, DomainError, SingularInformationError
from bcmtrend.simulation import Snapshot, TrialDesign, simulate_trial_arrays, snapshot

from conftest import alpha0_for


def test_info_single_subject_example():
    # one unit-exposure subject per arm, unit rates, Poisson limit: 1/(1/1 + 1/1)
    p = ConstParams(1.0, 1.0, 0.0)
    assert info_const(p, (np.ones(1), np.ones(1))) == pytest.approx(0.5)


def test_info_vanishes_for_infinite_dispersion():
    p = ConstParams(1.0, 2.0, math.inf)
    with pytest.raises(SingularInformationError):
        info_const(p, (np.ones(3), np.ones(3)))
    big = ConstParams(1.0, 2.0, 1e12)
    assert info_const(big, (np.ones(3), np.ones(3))) < 1e-11


def test_info_harmonic_oracle():
    p = ConstParams(0.8, 1.6, 0.5)
    trt, ctl = np.array([1.0, 2.0]), np.array([0.5, 1.5])
    i_t = sum(s * 0.8 / (1 + 0.5 * s * 0.8) for s in trt)
    i_c = sum(s * 1.6 / (1 + 0.5 * s * 1.6) for s in ctl)
    expect = i_t * i_c / (i_t + i_c)
    assert info_const(p, {Group.TREATMENT: trt, Group.CONTROL: ctl}) == pytest.approx(expect, rel=1e-14)


def test_info_monotone_in_exposure_and_dispersion():
    base = ConstParams(1.0, 1.5, 0.8)
    expo = (np.full(5, 1.0), np.full(5, 1.0))
    values = [info_const(base, (expo[0] * s, expo[1] * s)) for s in (0.5, 1.0, 2.0, 4.0)]
    assert np.all(np.diff(values) > 0)
    values = [info_const(ConstParams(1.0, 1.5, v), expo) for v in (0.0, 0.5, 1.0, 2.0)]
    assert np.all(np.diff(values) < 0)


def test_params_validation():
    with pytest.raises(DomainError):
        ConstParams(0.0, 1.0, 1.0)
    with pytest.raises(DomainError):
        ConstParams(1.0, 1.0, -0.1)
    assert ConstParams(2.0, 1.0, 1.0).log_rate_difference == pytest.approx(math.log(2.0))


def test_info_from_blinded_fit_splits_rates():
    w = AllocationWeights(0.5)
    bfit = ConstBlindedFit(mu_c=1.2, mu_t=0.6, varphi=0.9, method=BlindedMethod.LUMPING, converged=True)
    expo = np.linspace(0.5, 2.0, 20)
    expect = info_const(ConstParams(0.6, 1.2, 0.9), (expo, expo)) / 2
    assert info_const_blinded(bfit, w, expo) == pytest.approx(expect, rel=1e-12)


def _sim(seed, n=400, a1=-1.0, beta=math.log(0.7), t=4.0):
    p = ModelParams(alpha0_for(a1), a1, beta, 1.25)
    return snapshot(simulate_trial_arrays(TrialDesign(n), p, np.random.default_rng(seed)), t), p


def test_lumping_rate_split_identity():
    snap, _ = _sim(1)
    beta_h1, w = math.log(0.7), AllocationWeights(0.5)
    fit = fit_const_blinded(Snapshot(snap.exposure, snap.event_times), beta_h1, w)
    assert fit.converged
    mult = 0.5 * 0.7 + 0.5
    assert fit.mu_c == pytest.approx(fit.mu_b / mult, rel=1e-12)
    assert fit.mu_t == pytest.approx(fit.mu_c * 0.7, rel=1e-12)
    # pooled rate matches events per unit exposure (the NB score equation for the mean)
    counts = snap.counts
    assert fit.mu_b == pytest.approx(counts.sum() / snap.exposure.sum(), rel=0.05)


def test_methods_coincide_without_effect():
    snap, _ = _sim(2, beta=0.0)
    blind = Snapshot(snap.exposure, snap.event_times)
    a = fit_const_blinded(blind, 0.0, AllocationWeights(), "lumping")
    b = fit_const_blinded(blind, 0.0, AllocationWeights(), "mixture")
    assert a.mu_c == pytest.approx(b.mu_c, rel=1e-7)
    assert a.varphi == pytest.approx(b.varphi, rel=1e-6)


def test_constant_rate_under_declining_trend_is_averaged():
    snap, p = _sim(3, n=4000, a1=-1.5, beta=0.0)
    fit = fit_const_unblinded(snap)
    assert fit.converged
    lo, hi = rate(p, Group.CONTROL, 2.0), rate(p, Group.CONTROL, 0.0)
    assert lo < fit.params.mu_c < hi
    assert fit.params.mu_c == pytest.approx(cumulative_rate(p, Group.CONTROL, 2.0) / 2.0, rel=0.1)


def test_unblinded_fit_covariance_and_wald():
    snap, _ = _sim(4)
    fit = fit_const_unblinded(snap)
    var_diff = fit.covariance[0, 0] + fit.covariance[1, 1] - 2 * fit.covariance[0, 1]
    assert fit.se == pytest.approx(math.sqrt(var_diff), rel=1e-10)
    assert fit.wald_statistic == pytest.approx(fit.log_rate_difference / fit.se, rel=1e-10)
    assert fit.covariance[2, 0] == 0.0


def test_unblinded_fit_boundary():
    snap = Snapshot(np.ones(4), (np.array([0.2]), np.array([]), np.array([0.5, 0.6]), np.array([])),
                    group=np.array([0.0, 1.0, 0.0, 1.0]))
    with pytest.raises(BoundaryError):
        fit_const_unblinded(snap)


def test_blinded_info_needs_converged_fit():
    bad = ConstBlindedFit(math.nan, math.nan, math.nan, BlindedMethod.LUMPING, False)
    with pytest.raises(SingularInformationError):
        info_const_blinded(bad, AllocationWeights(), np.ones(4))
