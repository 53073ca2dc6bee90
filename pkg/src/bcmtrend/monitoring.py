"""Blinded continuous information monitoring and the final unblinded analysis."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from . import _kernels as K
from .constant import fit_const_arrays
from .errors import DomainError, NumericalError, ValidationError
from .simulation import TrialArrays, TrialDesign, arrays_from_paths
from .trend import SufficientData, fit_arrays


class Procedure(enum.Enum):
    """Monitoring procedure: model for the blinded fit and the final test."""

    TREND_LUMP = "TrendLump"
    TREND_MIX = "TrendMix"
    CONST_LUMP = "ConstLump"
    CONST_MIX = "ConstMix"
    FIXED = "FixedDesign"

    @classmethod
    def parse(cls, value) -> "Procedure":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("-", "").replace("_", "")
        for p in cls:
            if key in (p.value.lower(), p.name.lower().replace("_", "")):
                return p
        if key == "fixed":
            return cls.FIXED
        raise ValidationError(f"unknown procedure {value!r}", field="procedure")

    @property
    def with_trend(self) -> bool:
        return self in (Procedure.TREND_LUMP, Procedure.TREND_MIX, Procedure.FIXED)

    @property
    def kernel_mode(self) -> int:
        return {
            Procedure.TREND_LUMP: K.MODE_TREND_LUMP,
            Procedure.TREND_MIX: K.MODE_TREND_MIX,
            Procedure.CONST_LUMP: K.MODE_CONST_LUMP,
            Procedure.CONST_MIX: K.MODE_CONST_MIX,
        }[self]


def target_information(alpha: float, power: float, beta_h1: float) -> float:
    """Information needed for a one-sided level-``alpha`` test to reach ``power`` at ``beta_h1``.

    Raises:
        DomainError: ``beta_h1`` is zero or a probability is outside ``(0, 1)``.
    """
    if beta_h1 == 0 or not math.isfinite(beta_h1):
        raise DomainError("beta_h1 must be finite and non-zero")
    if not (0 < alpha < 1 and 0 < power < 1):
        raise DomainError("alpha and power must lie in (0, 1)")
    z = stats.norm.ppf(1.0 - alpha) + stats.norm.ppf(power)
    return float(z * z / (beta_h1 * beta_h1))


@dataclass(frozen=True)
class MonitoringSpec:
    """What to monitor and when to stop."""

    procedure: Procedure
    beta_h1: float
    alpha: float = 0.025
    target_info: float = math.nan
    max_iter: int = 100
    # continue past study_duration until every subject has completed follow-up
    allow_extension: bool = False

    def __post_init__(self):
        object.__setattr__(self, "procedure", Procedure.parse(self.procedure))
        if not 0 < self.alpha < 0.5:
            raise ValidationError("must lie in (0, 0.5)", field="alpha")
        if not math.isfinite(self.beta_h1):
            raise ValidationError("must be finite", field="beta_h1")
        if self.procedure is not Procedure.FIXED and not self.target_info > 0:
            raise ValidationError("must be positive", field="target_info")

    @classmethod
    def planned(cls, procedure, rate_ratio_h1: float, alpha: float = 0.025,
                power: float = 0.8, **kwargs) -> "MonitoringSpec":
        beta_h1 = math.log(rate_ratio_h1)
        return cls(procedure, beta_h1, alpha, target_information(alpha, power, beta_h1), **kwargs)


@dataclass
class MonitoringOutcome:
    """Result of one monitored (or fixed-design) trial.

    ``beta_hat`` is the log rate ratio from the final model: the trend model
    for trend and fixed-design procedures, the constant-rate model otherwise.
    ``info_trajectory`` lists ``(t, info)`` for every grid point whose
    blinded fit succeeded, up to and including the stopping time.
    """

    stop_time: float
    stopped_early: bool
    reject: bool
    beta_hat: float
    n_analyzed: int
    info_trajectory: list = field(default_factory=list, repr=False)
    wald_statistic: float = math.nan
    crossed: bool = False
    skipped_fits: int = 0
    final_converged: bool = True
    final_error: str = ""


@dataclass
class _EventIndex:
    arr: TrialArrays
    ev_cal: np.ndarray
    ev_subj: np.ndarray
    ev_s: np.ndarray
    max_count: int


def _index(arr: TrialArrays) -> _EventIndex:
    cal = arr.event_calendar
    order = np.argsort(cal, kind="stable")
    counts = np.bincount(arr.event_subject, minlength=arr.entry.size)
    return _EventIndex(arr, cal[order], arr.event_subject[order].astype(np.int64),
                       arr.event_time[order], int(counts.max()) if counts.size else 0)


def sufficient_at(arr: TrialArrays, t: float, with_groups: bool = True) -> SufficientData:
    """Counts, exposures and event-time sum visible at calendar time ``t``."""
    m = int(np.searchsorted(arr.entry, t, side="left"))
    expo = np.minimum(t - arr.entry[:m], arr.max_followup)
    seen = (arr.event_calendar <= t) & (arr.event_subject < m)
    counts = np.bincount(arr.event_subject[seen], minlength=m)[:m]
    time_sum = float(arr.event_time[seen].sum())
    group = arr.group[:m].astype(float) if with_groups else None
    return SufficientData.from_arrays(counts, expo, group, time_sum)


def _grid(design: TrialDesign, spec: MonitoringSpec) -> np.ndarray:
    grid = design.monitoring_grid()
    if spec.allow_extension:
        last = design.recruitment_period + design.max_followup
        if last > design.study_duration:
            extra = design.study_duration + design.monitor_step * np.arange(
                1, int(math.ceil((last - design.study_duration) / design.monitor_step)) + 1)
            grid = np.append(grid, np.minimum(extra, last))
    return grid


def monitor_information(index: _EventIndex, design: TrialDesign, spec: MonitoringSpec):
    """Blinded information along the grid; returns ``(grid, info, status, stop_index, crossed)``."""
    grid = _grid(design, spec)
    traj = np.empty(grid.size)
    status = np.empty(grid.size, dtype=np.int64)
    arr = index.arr
    stop, crossed = K.monitor_trial(
        arr.entry, index.ev_cal, index.ev_subj, index.ev_s, arr.max_followup, grid,
        spec.procedure.kernel_mode, spec.beta_h1, design.weights.w_treatment, spec.target_info,
        index.max_count, spec.max_iter, traj, status)
    return grid, traj, status, int(stop), bool(crossed)


def final_analysis(arr: TrialArrays, t: float, procedure: Procedure, alpha: float):
    """Unblinded test at calendar time ``t``; returns ``(reject, beta_hat, T, n, converged, error)``."""
    data = sufficient_at(arr, t)
    n = int(data.counts.size)
    try:
        if procedure.with_trend:
            res = fit_arrays(data, with_trend=True, full_fisher=False)
            beta_hat, wald, ok = res.estimates.beta, res.wald_statistic, res.converged
        else:
            res = fit_const_arrays(data)
            beta_hat, wald, ok = res.log_rate_difference, res.wald_statistic, res.converged
    except NumericalError as exc:
        return False, math.nan, math.nan, n, False, type(exc).__name__
    if not (ok and math.isfinite(wald)):
        return False, beta_hat, math.nan, n, False, "ConvergenceError"
    return bool(wald < stats.norm.ppf(alpha)), float(beta_hat), float(wald), n, True, ""


def run_monitored_trial(trial, design: TrialDesign, spec: MonitoringSpec) -> MonitoringOutcome:
    """Monitor blinded information on the weekly grid, stop at the first crossing, then test.

    The blinded nuisance fit at each grid point is warm-started from the
    last successful one.  A grid point whose fit fails is skipped (it can
    never trigger a stop).  Without a crossing the trial ends at the study
    end.  The final analysis unblinds the data at the stopping time and
    rejects when the Wald statistic is below ``z_alpha``.

    Args:
        trial: list of :class:`~bcmtrend.simulation.SubjectPath` or
            :class:`~bcmtrend.simulation.TrialArrays`.
    """
    arr = trial if isinstance(trial, TrialArrays) else arrays_from_paths(trial, design.max_followup)
    if spec.procedure is Procedure.FIXED:
        stop_time, crossed, trajectory, skipped = design.study_duration, False, [], 0
    else:
        grid, traj, status, stop, crossed = monitor_information(_index(arr), design, spec)
        stop_time = float(grid[stop])
        seen = slice(0, stop + 1)
        ok = np.isfinite(traj[seen])
        trajectory = [(float(t), float(v)) for t, v in zip(grid[seen][ok], traj[seen][ok])]
        skipped = int(np.sum(status[seen] != K.STATUS_OK))
    reject, beta_hat, wald, n, ok, err = final_analysis(arr, stop_time, spec.procedure, spec.alpha)
    return MonitoringOutcome(stop_time, bool(crossed and stop_time < design.study_duration),
                             reject, beta_hat, n, trajectory, wald, bool(crossed), skipped, ok, err)
