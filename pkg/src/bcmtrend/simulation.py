"""Trial simulation: accrual, frailties, event generation and calendar snapshots."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import AllocationWeights, Group, ModelParams, cumulative_rate
from .errors import DomainError, ValidationError


@dataclass(frozen=True)
class TrialDesign:
    """Recruitment, follow-up and monitoring schedule of a trial (years)."""

    n_total: int
    weights: AllocationWeights = field(default_factory=AllocationWeights)
    recruitment_period: float = 2.0
    max_followup: float = 2.0
    study_duration: float = 4.0
    monitor_start: float = 0.5
    monitor_step: float = 1.0 / 52.0

    def __post_init__(self):
        if int(self.n_total) != self.n_total or self.n_total < 1:
            raise ValidationError("must be a positive integer", field="n_total")
        if not self.recruitment_period >= 0:
            raise ValidationError("must be non-negative", field="recruitment_period")
        if not self.max_followup > 0:
            raise ValidationError("must be positive", field="max_followup")
        if not self.study_duration >= self.recruitment_period:
            raise ValidationError("must be at least the recruitment period", field="study_duration")
        if not 0 <= self.monitor_start < self.study_duration:
            raise ValidationError("must lie in [0, study_duration)", field="monitor_start")
        if not self.monitor_step > 0:
            raise ValidationError("must be positive", field="monitor_step")

    def monitoring_grid(self) -> np.ndarray:
        """Calendar times of the blinded looks, ending exactly at the study end."""
        k = np.arange(int(math.floor((self.study_duration - self.monitor_start) / self.monitor_step + 1e-9)) + 1)
        grid = self.monitor_start + k * self.monitor_step
        grid = grid[grid < self.study_duration - 1e-9]
        return np.append(grid, self.study_duration)


@dataclass
class SubjectPath:
    """One simulated subject; ``events`` are study times in ``[0, max_followup]``."""

    group: Group
    entry: float
    frailty: float
    events: np.ndarray


@dataclass(frozen=True)
class Snapshot:
    """Cross-section of a trial at one calendar time.

    ``group`` is ``None`` for a blinded snapshot.  Event times are study
    times, each no larger than the subject's exposure.
    """

    exposure: np.ndarray
    event_times: tuple
    group: np.ndarray | None = None
    subject_ids: tuple | None = None
    entry: np.ndarray | None = None

    def __post_init__(self):
        expo = np.asarray(self.exposure, dtype=float)
        object.__setattr__(self, "exposure", expo)
        times = tuple(np.asarray(e, dtype=float) for e in self.event_times)
        object.__setattr__(self, "event_times", times)
        if len(times) != expo.size:
            raise ValidationError("one event list per subject required", field="event_times")
        if self.group is not None:
            grp = np.asarray(self.group, dtype=float)
            if grp.shape != expo.shape or not np.all((grp == 0) | (grp == 1)):
                raise ValidationError("group indicators must be 0/1 per subject", field="group")
            object.__setattr__(self, "group", grp)
        if np.any(~np.isfinite(expo)) or np.any(expo < 0):
            raise ValidationError("exposure must be finite and non-negative", field="exposure")
        for j, ev in enumerate(times):
            if ev.size and (np.any(ev < 0) or np.any(ev > expo[j]) or np.any(np.diff(ev) < 0)):
                raise ValidationError(f"event times of subject {j} must be ordered within [0, exposure]",
                                      field="event_times")

    @property
    def blinded(self) -> bool:
        return self.group is None

    @property
    def size(self) -> int:
        return self.exposure.size

    @property
    def counts(self) -> np.ndarray:
        return np.array([ev.size for ev in self.event_times], dtype=float)

    @property
    def time_sum(self) -> float:
        return float(sum(ev.sum() for ev in self.event_times))

    def blind(self) -> "Snapshot":
        return Snapshot(self.exposure, self.event_times, None, self.subject_ids, self.entry)

    def by_group(self) -> dict:
        """Exposure arrays keyed by :class:`Group` (unblinded snapshots only)."""
        if self.group is None:
            raise ValidationError("snapshot is blinded", field="group")
        return {Group.TREATMENT: self.exposure[self.group == 1],
                Group.CONTROL: self.exposure[self.group == 0]}


def draw_frailty(phi: float, rng: np.random.Generator, size=None):
    """Gamma frailty with mean 1 and variance ``phi``."""
    if not (phi > 0) or not math.isfinite(phi):
        raise DomainError(f"phi must be positive, got {phi!r}")
    return rng.gamma(1.0 / phi, phi, size=size)


def _event_time_quantile(u, alpha1: float, cap: float):
    # inverse of F(s) = (exp(a1 s) - 1) / (exp(a1 cap) - 1)
    x = alpha1 * cap
    if abs(x) < 1e-10:
        return u * cap
    return np.log1p(u * np.expm1(x)) / alpha1


def simulate_subject(params: ModelParams, group: Group, frailty: float, exposure_cap: float,
                     rng: np.random.Generator) -> np.ndarray:
    """Ordered event study times of one subject followed for ``exposure_cap`` years."""
    if not exposure_cap > 0:
        raise DomainError("exposure_cap must be positive")
    mean = frailty * cumulative_rate(params, group, exposure_cap)
    k = rng.poisson(mean)
    times = _event_time_quantile(rng.random(k), params.alpha1, exposure_cap)
    return np.sort(np.minimum(times, exposure_cap))


@dataclass
class TrialArrays:
    """Column form of a simulated trial, subjects sorted by entry time."""

    group: np.ndarray
    entry: np.ndarray
    frailty: np.ndarray
    event_subject: np.ndarray
    event_time: np.ndarray
    max_followup: float

    @property
    def event_calendar(self) -> np.ndarray:
        return self.entry[self.event_subject] + self.event_time


def simulate_trial_arrays(design: TrialDesign, params: ModelParams,
                          rng: np.random.Generator) -> TrialArrays:
    """Simulate a whole trial in column form.

    Independent child streams are used for allocation, accrual, frailty,
    counts and event times, so scenarios that differ only in the trend
    parameter share allocation, accrual and frailty draws.
    """
    g_rng, e_rng, f_rng, c_rng, t_rng = rng.spawn(5)
    n = int(design.n_total)
    group = (g_rng.random(n) < design.weights.w_treatment).astype(np.int8)
    entry = e_rng.random(n) * design.recruitment_period
    frailty = draw_frailty(params.phi, f_rng, size=n)
    order = np.argsort(entry, kind="stable")
    group, entry, frailty = group[order], entry[order], frailty[order]
    cap = design.max_followup
    base = cumulative_rate(params, Group.CONTROL, cap)
    mean = frailty * base * np.exp(params.beta * group)
    k = c_rng.poisson(mean)
    subj = np.repeat(np.arange(n), k)
    times = np.minimum(_event_time_quantile(t_rng.random(subj.size), params.alpha1, cap), cap)
    # order statistics within subject
    key = np.lexsort((times, subj))
    return TrialArrays(group, entry, frailty, subj[key], times[key], cap)


def simulate_trial(design: TrialDesign, params: ModelParams, rng: np.random.Generator) -> list:
    """Simulate ``design.n_total`` subjects as :class:`SubjectPath` records."""
    arr = simulate_trial_arrays(design, params, rng)
    return paths_from_arrays(arr)


def paths_from_arrays(arr: TrialArrays) -> list:
    bounds = np.searchsorted(arr.event_subject, np.arange(arr.entry.size + 1))
    return [
        SubjectPath(Group(int(arr.group[j])), float(arr.entry[j]), float(arr.frailty[j]),
                    arr.event_time[bounds[j]:bounds[j + 1]].copy())
        for j in range(arr.entry.size)
    ]


def arrays_from_paths(trial: list, max_followup: float) -> TrialArrays:
    entry = np.array([p.entry for p in trial], dtype=float)
    order = np.argsort(entry, kind="stable")
    paths = [trial[i] for i in order]
    counts = np.array([len(p.events) for p in paths], dtype=int)
    subj = np.repeat(np.arange(len(paths)), counts)
    times = np.concatenate([np.asarray(p.events, dtype=float) for p in paths]) if paths else np.empty(0)
    return TrialArrays(
        np.array([int(p.group) for p in paths], dtype=np.int8),
        entry[order],
        np.array([p.frailty for p in paths], dtype=float),
        subj,
        times,
        max_followup,
    )


def snapshot(trial, t: float, blinded: bool = False, max_followup: float | None = None) -> Snapshot:
    """Data visible at calendar time ``t``.

    ``trial`` is a list of :class:`SubjectPath` (then ``max_followup`` is
    required) or a :class:`TrialArrays`.  Subjects not yet enrolled, or with
    zero exposure, are excluded.
    """
    if t < 0:
        raise DomainError("calendar time must be non-negative")
    if isinstance(trial, TrialArrays):
        arr = trial
    else:
        if max_followup is None:
            raise DomainError("max_followup is required for a list of subject paths")
        arr = arrays_from_paths(trial, max_followup)
    enrolled = arr.entry < t
    idx = np.flatnonzero(enrolled)
    expo = np.minimum(t - arr.entry[idx], arr.max_followup)
    bounds = np.searchsorted(arr.event_subject, np.arange(arr.entry.size + 1))
    events = []
    for j, s in zip(idx, expo):
        ev = arr.event_time[bounds[j]:bounds[j + 1]]
        events.append(ev[ev <= s])
    group = None if blinded else arr.group[idx].astype(float)
    return Snapshot(expo, tuple(events), group, None, arr.entry[idx])
