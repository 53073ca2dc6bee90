import math

import numpy as np
import pytest

from bcmtrend.core import ModelParams
from bcmtrend.errors import DomainError, ValidationError
from bcmtrend.monitoring import (
    MonitoringSpec,
    Procedure,
    final_analysis,
    run_monitored_trial,
    sufficient_at,
    target_information,
)
from bcmtrend.simulation import TrialDesign, simulate_trial, simulate_trial_arrays, snapshot

from conftest import alpha0_for

DESIGN = TrialDesign(148)
TRUE = ModelParams(alpha0_for(-1.0), -1.0, math.log(0.5), 1.25)


Z975, Z80, Z90 = 1.959963984540054, 0.8416212335729143, 1.2815515655446004


@pytest.mark.parametrize("rr,z_power,power", [(0.5, Z80, 0.8), (0.7, Z80, 0.8), (0.7, Z90, 0.9)])
def test_target_information_values(rr, z_power, power):
    expected = (Z975 + z_power) ** 2 / math.log(rr) ** 2
    assert target_information(0.025, power, math.log(rr)) == pytest.approx(expected, rel=1e-12)


def test_target_information_errors():
    with pytest.raises(DomainError):
        target_information(0.025, 0.8, 0.0)
    with pytest.raises(DomainError):
        target_information(1.2, 0.8, -0.5)


def test_procedure_parse():
    assert Procedure.parse("trend-lump") is Procedure.TREND_LUMP
    assert Procedure.parse("ConstMix") is Procedure.CONST_MIX
    assert Procedure.parse("fixed") is Procedure.FIXED
    with pytest.raises(ValidationError):
        Procedure.parse("bogus")


def test_spec_validation():
    with pytest.raises(ValidationError, match="target_info"):
        MonitoringSpec(Procedure.TREND_LUMP, -0.5)
    with pytest.raises(ValidationError, match="alpha"):
        MonitoringSpec(Procedure.FIXED, -0.5, alpha=0.7)
    spec = MonitoringSpec.planned("TrendMix", 0.5)
    assert spec.target_info == pytest.approx((Z975 + Z80) ** 2 / math.log(0.5) ** 2, rel=1e-12)


def _trial(seed):
    return simulate_trial_arrays(DESIGN, TRUE, np.random.default_rng(seed))


def test_tiny_target_stops_at_first_grid_point():
    spec = MonitoringSpec(Procedure.TREND_LUMP, math.log(0.5), target_info=1e-6)
    out = run_monitored_trial(_trial(1), DESIGN, spec)
    assert out.stop_time == pytest.approx(0.5)
    assert out.stopped_early and out.crossed
    assert len(out.info_trajectory) == 1


def test_unreachable_target_runs_to_study_end():
    spec = MonitoringSpec(Procedure.TREND_MIX, math.log(0.5), target_info=1e9)
    out = run_monitored_trial(_trial(2), DESIGN, spec)
    assert out.stop_time == DESIGN.study_duration
    assert not out.stopped_early and not out.crossed
    assert out.n_analyzed == DESIGN.n_total


@pytest.mark.parametrize("proc", [p for p in Procedure if p is not Procedure.FIXED])
def test_information_trajectory_crosses_target(proc):
    spec = MonitoringSpec.planned(proc, 0.5)
    out = run_monitored_trial(_trial(3), DESIGN, spec)
    times, info = np.array(out.info_trajectory).T
    assert np.all(np.diff(times) > 0)
    if out.crossed:
        assert info[-1] >= spec.target_info
        assert np.all(info[:-1] < spec.target_info)
    assert out.final_converged and math.isfinite(out.beta_hat)


def test_monitoring_is_deterministic():
    spec = MonitoringSpec.planned(Procedure.TREND_MIX, 0.5)
    a = run_monitored_trial(_trial(4), DESIGN, spec)
    b = run_monitored_trial(_trial(4), DESIGN, spec)
    assert a.stop_time == b.stop_time and a.beta_hat == b.beta_hat
    assert a.info_trajectory == b.info_trajectory


def test_subject_paths_and_arrays_agree():
    spec = MonitoringSpec.planned(Procedure.TREND_LUMP, 0.5)
    paths = simulate_trial(DESIGN, TRUE, np.random.default_rng(5))
    arr = simulate_trial_arrays(DESIGN, TRUE, np.random.default_rng(5))
    a = run_monitored_trial(paths, DESIGN, spec)
    b = run_monitored_trial(arr, DESIGN, spec)
    assert a.stop_time == b.stop_time
    assert a.beta_hat == pytest.approx(b.beta_hat, rel=1e-12)


def test_fixed_design_analyses_at_study_end():
    spec = MonitoringSpec(Procedure.FIXED, math.log(0.5))
    out = run_monitored_trial(_trial(6), DESIGN, spec)
    assert out.stop_time == DESIGN.study_duration
    assert out.info_trajectory == [] and not out.crossed
    assert out.reject == (out.wald_statistic < -Z975)


def test_sufficient_data_matches_snapshot():
    arr = _trial(7)
    for t in (0.7, 2.3, 4.0):
        data = sufficient_at(arr, t)
        snap = snapshot(arr, t)
        assert np.array_equal(data.counts, snap.counts)
        assert np.allclose(data.exposure, snap.exposure)
        assert data.time_sum == pytest.approx(snap.time_sum)


def test_final_analysis_reports_failure_without_raising():
    arr = _trial(8)
    reject, beta_hat, wald, n, ok, err = final_analysis(arr, 0.01, Procedure.TREND_LUMP, 0.025)
    assert not reject and not ok and err
