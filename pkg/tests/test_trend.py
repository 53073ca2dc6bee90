import math

import numpy as np
import pytest
from scipy import stats

from bcmtrend.core import Group, ModelParams, trend_integral
from bcmtrend.errors import DecisionUnavailableError, NoInformationError, SingularInformationError, ValidationError
from bcmtrend.simulation import Snapshot, TrialDesign, simulate_trial_arrays, snapshot
from bcmtrend.trend import (
    FitResult,
    expected_phi_information,
    fisher_trend,
    fit_trend,
    hessian_trend,
    information_beta,
    loglik_trend,
    score_trend,
    wald_decision,
)

from conftest import alpha0_for


def _oracle_loglik(p: ModelParams, snap: Snapshot) -> float:
    """Frailty-integrated likelihood of the observed event times, term by term."""
    total = 0.0
    r = 1.0 / p.phi
    for s, ev, x in zip(snap.exposure, snap.event_times, snap.group):
        lam = math.exp(p.alpha0 + p.beta * x)
        big = lam * (math.expm1(p.alpha1 * s) / p.alpha1 if p.alpha1 else s)
        n = len(ev)
        # NB mass of the count
        total += (math.lgamma(n + r) - math.lgamma(r) - math.lgamma(n + 1)
                  + n * math.log(p.phi * big) - (n + r) * math.log1p(p.phi * big))
        # conditional density of the event times given the count (unordered)
        total += sum(math.log(lam) + p.alpha1 * t - math.log(big) for t in ev)
    return total


def _sim_snapshot(seed, n=80, beta=-0.4, a1=-1.0, t=3.0):
    p = ModelParams(alpha0_for(a1), a1, beta, 1.25)
    return snapshot(simulate_trial_arrays(TrialDesign(n), p, np.random.default_rng(seed)), t)


def test_loglik_matches_term_by_term_oracle(fixture_snapshot):
    for p in (ModelParams(0.2, -0.7, -0.3, 0.9), ModelParams(-1.0, 0.4, 0.5, 0.05),
              ModelParams(0.0, 0.0, 0.0, 2.0)):
        assert loglik_trend(p, fixture_snapshot) == pytest.approx(_oracle_loglik(p, fixture_snapshot), rel=1e-12)


def test_loglik_zero_counts_closed_form():
    snap = Snapshot(np.array([1.0, 2.0]), (np.array([]), np.array([])), group=np.array([1.0, 0.0]))
    p = ModelParams(0.1, -0.5, -0.3, 0.8)
    expected = 0.0
    for s, x in ((1.0, 1), (2.0, 0)):
        big = math.exp(p.alpha0 + p.beta * x) * trend_integral(p.alpha1, s)
        expected -= math.log1p(p.phi * big) / p.phi
    assert loglik_trend(p, snap) == pytest.approx(expected, rel=1e-13)


def test_label_swap_symmetry(fixture_snapshot):
    p = ModelParams(0.2, -0.7, -0.3, 0.9)
    swapped = Snapshot(fixture_snapshot.exposure, fixture_snapshot.event_times, group=1.0 - fixture_snapshot.group)
    q = ModelParams(p.alpha0 + p.beta, p.alpha1, -p.beta, p.phi)
    assert loglik_trend(q, swapped) == pytest.approx(loglik_trend(p, fixture_snapshot), rel=1e-13)


def test_score_and_hessian_match_finite_differences():
    snap = _sim_snapshot(3)
    p = ModelParams(0.3, -0.8, -0.2, 1.1)
    theta = p.as_array()
    g = score_trend(p, snap)
    h = hessian_trend(p, snap)
    for i in range(4):
        e = np.zeros(4)
        e[i] = 1e-5 * max(1.0, abs(theta[i]))
        up = ModelParams.from_array(theta + e)
        dn = ModelParams.from_array(theta - e)
        fd = (loglik_trend(up, snap) - loglik_trend(dn, snap)) / (2 * e[i])
        assert g[i] == pytest.approx(fd, rel=1e-6, abs=1e-7)
        fd_h = (score_trend(up, snap) - score_trend(dn, snap)) / (2 * e[i])
        assert np.allclose(h[:, i], fd_h, rtol=1e-5, atol=1e-6)


def test_beta_score_zero_without_treated_subjects(fixture_snapshot):
    ctl = Snapshot(fixture_snapshot.exposure, fixture_snapshot.event_times, group=np.zeros(3))
    assert score_trend(ModelParams(0.1, -0.3, 0.7, 1.0), ctl)[2] == 0.0


def test_fisher_structure():
    p = ModelParams(0.0, -1.0, -0.5, 1.25)
    expo = {Group.TREATMENT: np.full(10, 2.0), Group.CONTROL: np.linspace(0.5, 2.0, 10)}
    f = fisher_trend(p, expo)
    assert np.all(f[3, :3] == 0.0) and np.all(f[:3, 3] == 0.0)
    assert np.allclose(f, f.T)
    assert np.all(np.linalg.eigvalsh(f) > 0)
    ctl_only = fisher_trend(p, (np.empty(0), np.full(5, 2.0)))
    assert ctl_only[2, 2] == 0.0
    with pytest.raises(SingularInformationError):
        information_beta(ctl_only)


def test_fisher_beta_block_closed_form():
    # alpha1 = 0, single exposure: I_beta = 1 / (1/I_T + 1/I_C) with I_i = n m_i / (1 + phi m_i)
    p = ModelParams(0.2, 0.0, -0.4, 0.7)
    f = fisher_trend(p, (np.full(7, 1.5), np.full(9, 1.5)))
    m_t, m_c = 1.5 * math.exp(0.2 - 0.4), 1.5 * math.exp(0.2)
    i_t, i_c = 7 * m_t / (1 + 0.7 * m_t), 9 * m_c / (1 + 0.7 * m_c)
    assert information_beta(f, with_trend=False) == pytest.approx(1 / (1 / i_t + 1 / i_c), rel=1e-12)


def test_information_label_swap_invariance():
    p = ModelParams(0.1, -0.6, -0.5, 1.25)
    trt, ctl = np.linspace(0.3, 2.0, 8), np.linspace(0.1, 1.7, 11)
    q = ModelParams(p.alpha0 + p.beta, p.alpha1, -p.beta, p.phi)
    a = information_beta(fisher_trend(p, (trt, ctl)))
    b = information_beta(fisher_trend(q, (ctl, trt)))
    assert a == pytest.approx(b, rel=1e-10)


def test_information_grows_with_subjects():
    p = ModelParams(0.1, -0.6, -0.5, 1.25)
    trt, ctl = np.linspace(0.3, 2.0, 8), np.linspace(0.1, 1.7, 11)
    base = information_beta(fisher_trend(p, (trt, ctl)))
    assert information_beta(fisher_trend(p, (np.append(trt, 1.0), ctl))) > base
    assert information_beta(fisher_trend(p, (trt, np.append(ctl, 1.0)))) > base


def test_fisher_rejects_empty_exposure():
    with pytest.raises(SingularInformationError):
        fisher_trend(ModelParams(0, 0, 0, 1), (np.zeros(3), np.zeros(2)))
    with pytest.raises(ValidationError):
        fisher_trend(ModelParams(0, 0, 0, 1), (np.array([-1.0]), np.ones(2)))


def test_expected_phi_information_matches_simulation(rng):
    means, phi = np.array([0.4, 1.5, 3.0]), 1.25
    r = 1.0 / phi
    draws = rng.negative_binomial(r, 1.0 / (1.0 + phi * means), size=(200_000, 3))
    # observed -d^2/dphi^2 of the NB log mass, summed over the three subjects
    top = draws.max()
    lead = np.concatenate([[0.0], np.cumsum(np.arange(top) ** 2 / (1.0 + np.arange(top) * phi) ** 2)])
    k_terms = lead[draws]
    y = phi * means
    h = (-2 * np.log1p(y) / phi**3 + 2 * means / (phi**2 * (1 + y)) + means**2 / (phi * (1 + y) ** 2))
    obs = k_terms - draws * means**2 / (1 + y) ** 2 - h
    value = expected_phi_information(means, phi)
    assert obs.sum(axis=1).mean() == pytest.approx(value, rel=0.02)
    assert value > 0


def test_expected_phi_information_empty():
    assert expected_phi_information([], 1.0) == 0.0


def test_fit_recovers_truth_and_is_idempotent():
    snap = _sim_snapshot(21, n=3000, t=4.0)
    res = fit_trend(snap)
    assert res.converged
    assert abs(res.score).max() < 1e-6
    se = res.standard_errors()
    truth = np.array([alpha0_for(-1.0), -1.0, -0.4, 1.25])
    assert np.all(np.abs(res.estimates.as_array() - truth) < 4 * se)
    again = fit_trend(snap, init=res.estimates)
    assert again.iterations <= 2
    assert np.allclose(again.estimates.as_array(), res.estimates.as_array(), rtol=1e-8)


def test_fit_wald_statistic_definition():
    res = fit_trend(_sim_snapshot(4, n=400))
    assert res.wald_statistic == pytest.approx(res.estimates.beta * math.sqrt(res.information_beta))
    assert res.se_beta == pytest.approx(1 / math.sqrt(res.information_beta))


def test_fit_without_events_or_groups():
    empty = Snapshot(np.ones(4), tuple(np.array([]) for _ in range(4)), group=np.array([1.0, 0, 1, 0]))
    with pytest.raises(NoInformationError):
        fit_trend(empty)
    one_arm = Snapshot(np.ones(2), (np.array([0.5]), np.array([0.2])), group=np.zeros(2))
    with pytest.raises(NoInformationError):
        fit_trend(one_arm)
    with pytest.raises(ValidationError):
        fit_trend(Snapshot(np.ones(1), (np.array([0.5]),)))


def _fit_with(wald, converged=True):
    return FitResult(ModelParams(0, 0, 0, 1), np.eye(4), 1.0, wald, converged, 1)


def test_wald_decision_boundaries():
    z = stats.norm.ppf(0.025)
    assert wald_decision(_fit_with(z - 1e-9))
    assert not wald_decision(_fit_with(z))
    assert not wald_decision(_fit_with(0.5))
    assert wald_decision(_fit_with(-1.7), alpha=0.05)
    with pytest.raises(DecisionUnavailableError):
        wald_decision(_fit_with(-3.0, converged=False))
    with pytest.raises(DecisionUnavailableError):
        wald_decision(_fit_with(math.nan))
