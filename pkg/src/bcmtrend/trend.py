"""Unblinded maximum-likelihood inference for the log-linear trend model."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats
from scipy.special import gammaln

from . import _kernels as K
from .core import Group, ModelParams, trend_integral
from .errors import (
    DecisionUnavailableError,
    EvaluationError,
    NoInformationError,
    SingularInformationError,
    ValidationError,
)
from .simulation import Snapshot


@dataclass
class SufficientData:
    """Per-subject counts and exposures plus the pooled event-time sum."""

    counts: np.ndarray
    exposure: np.ndarray
    group: np.ndarray
    time_sum: float
    count_tail: np.ndarray
    log_factorials: float

    @classmethod
    def from_arrays(cls, counts, exposure, group=None, time_sum=0.0):
        counts = np.ascontiguousarray(counts, dtype=float)
        exposure = np.ascontiguousarray(exposure, dtype=float)
        group = np.empty(0) if group is None else np.ascontiguousarray(group, dtype=float)
        top = int(counts.max()) if counts.size else 0
        tail = np.bincount(counts.astype(np.int64), minlength=top + 2)[::-1].cumsum()[::-1]
        # tail[k] = #{N >= k}; shift to #{N > k}
        tail = np.append(tail[1:], 0.0).astype(float)
        return cls(counts, exposure, group, float(time_sum), tail, float(gammaln(counts + 1.0).sum()))

    @classmethod
    def from_snapshot(cls, snap: Snapshot, need_groups: bool = True):
        if snap.size == 0:
            raise ValidationError("snapshot is empty", field="exposure")
        if np.any(snap.exposure <= 0):
            raise ValidationError("every subject needs positive exposure", field="exposure")
        if need_groups and snap.group is None:
            raise ValidationError("an unblinded snapshot is required", field="group")
        return cls.from_arrays(snap.counts, snap.exposure, snap.group, snap.time_sum)

    @property
    def total_events(self) -> float:
        return float(self.counts.sum())


def _evaluate(theta, data: SufficientData):
    grad = np.empty(4)
    hess = np.empty((4, 4))
    value = K.evaluate(
        np.asarray(theta, dtype=float), data.counts, data.exposure, data.group, True,
        np.zeros(1), np.zeros(1), np.zeros(1), data.total_events, data.time_sum,
        data.count_tail, data.log_factorials, grad, hess,
    )
    return value, grad, hess


def _checked(params: ModelParams, data: SufficientData):
    value, grad, hess = _evaluate(params.as_array(), data)
    if not (np.isfinite(value) and np.all(np.isfinite(grad))):
        raise EvaluationError(f"log-likelihood is not finite at {params}")
    return value, grad, hess


def loglik_trend(params: ModelParams, snap: Snapshot) -> float:
    """Log-likelihood of an unblinded snapshot, including event-time terms."""
    return float(_checked(params, SufficientData.from_snapshot(snap))[0])


def score_trend(params: ModelParams, snap: Snapshot) -> np.ndarray:
    """Gradient of :func:`loglik_trend`, ordered ``(alpha0, alpha1, beta, phi)``."""
    return _checked(params, SufficientData.from_snapshot(snap))[1]


def hessian_trend(params: ModelParams, snap: Snapshot) -> np.ndarray:
    """Observed Hessian of :func:`loglik_trend`."""
    return _checked(params, SufficientData.from_snapshot(snap))[2]


def _as_group_exposures(exposures_by_group):
    if isinstance(exposures_by_group, dict):
        trt = exposures_by_group.get(Group.TREATMENT, ())
        ctl = exposures_by_group.get(Group.CONTROL, ())
    else:
        trt, ctl = exposures_by_group
    trt = np.asarray(trt, dtype=float).ravel()
    ctl = np.asarray(ctl, dtype=float).ravel()
    return trt, ctl


def expected_phi_information(means, phi: float, tail: float = 1e-14) -> float:
    """``E[-d^2 loglik / d phi^2]`` summed over subjects with the given NB means.

    There is no closed form; the expectation is a truncated sum over the
    count distribution, cut where the remaining mass is below ``tail``.
    """
    means = np.asarray(means, dtype=float)
    means = means[means > 0]
    if means.size == 0:
        return 0.0
    r = 1.0 / phi
    prob = 1.0 / (1.0 + phi * means)
    top = int(np.max(stats.nbinom.isf(tail, r, prob))) + 2
    n = np.arange(top + 1, dtype=float)
    # sum_{k<n} k^2 / (1 + k phi)^2 for every n
    k = np.arange(top, dtype=float)
    lead = np.concatenate([[0.0], np.cumsum(k * k / (1.0 + k * phi) ** 2)])
    y = phi * means[:, None]
    den = 1.0 + y
    lp = np.log1p(y)
    with np.errstate(divide="ignore", invalid="ignore"):
        h2 = np.where(y < 1e-2, -2.0 / 3.0 + 1.5 * y - 2.4 * y * y,
                      (-2.0 * lp + 2.0 * y / den + y * y / den**2) / y**3)
    lam = means[:, None]
    curvature = lead[None, :] - (n[None, :] * lam**2 / den**2 + lam**3 * h2)
    pmf = stats.nbinom.pmf(n[None, :], r, prob[:, None])
    return float(np.sum(pmf * curvature))


def fisher_trend(params: ModelParams, exposures_by_group) -> np.ndarray:
    """Expected Fisher information matrix for ``(alpha0, alpha1, beta, phi)``.

    ``exposures_by_group`` is a ``{Group: exposures}`` mapping or a
    ``(treatment, control)`` pair.  Cross terms between ``phi`` and the other
    parameters vanish in expectation and are exactly zero here.
    """
    trt, ctl = _as_group_exposures(exposures_by_group)
    if np.any(trt < 0) or np.any(ctl < 0):
        raise ValidationError("exposures must be non-negative", field="exposure")
    expo = np.concatenate([trt, ctl])
    if expo.size == 0 or not np.any(expo > 0):
        raise SingularInformationError("no subject has positive exposure")
    xs = np.concatenate([np.ones(trt.size), np.zeros(ctl.size)])
    block = np.empty((3, 3))
    K.fisher_block(params.alpha0, params.alpha1, params.beta, params.phi,
                   expo, xs, np.ones(expo.size), block)
    out = np.zeros((4, 4))
    out[:3, :3] = block
    means = trend_integral(params.alpha1, expo) * np.exp(params.alpha0 + params.beta * xs)
    out[3, 3] = expected_phi_information(means, params.phi)
    return out


def information_beta(fisher: np.ndarray, with_trend: bool = True) -> float:
    """Information for ``beta``: ``1 / (fisher^-1)[beta, beta]``."""
    info = K.beta_information(np.ascontiguousarray(fisher[:3, :3]), with_trend)
    if not np.isfinite(info):
        raise SingularInformationError("Fisher information block is singular")
    return float(info)


@dataclass
class FitResult:
    """Outcome of an unblinded fit.

    When ``converged`` is false ``estimates`` holds the last iterate, which
    is not an estimate; ``wald_statistic`` and ``information_beta`` are NaN.
    """

    estimates: ModelParams
    fisher: np.ndarray
    information_beta: float
    wald_statistic: float
    converged: bool
    iterations: int
    loglik: float = math.nan
    at_phi_bound: bool = False
    with_trend: bool = True
    score: np.ndarray = field(default_factory=lambda: np.full(4, np.nan))

    @property
    def se_beta(self) -> float:
        return 1.0 / math.sqrt(self.information_beta)

    def standard_errors(self) -> np.ndarray:
        """Asymptotic standard errors from the inverse expected information."""
        idx = [0, 1, 2] if self.with_trend else [0, 2]
        cov = np.linalg.inv(self.fisher[np.ix_(idx, idx)])
        se = np.full(4, np.nan)
        se[idx] = np.sqrt(np.diag(cov))
        if self.fisher[3, 3] > 0:
            se[3] = 1.0 / math.sqrt(self.fisher[3, 3])
        return se


def default_start(data: SufficientData, log_mult: float = 0.0, beta: float = 0.0) -> np.ndarray:
    start = np.empty(4)
    K.initial_theta(data.counts, data.exposure, log_mult, beta, start)
    return start


def _check_groups(data: SufficientData):
    if data.total_events <= 0:
        raise NoInformationError("snapshot contains no events")
    if not (np.any(data.group == 1) and np.any(data.group == 0)):
        raise NoInformationError("both groups need at least one subject")


def fit_arrays(data: SufficientData, with_trend: bool = True, init=None, max_iter: int = 100,
               full_fisher: bool = True) -> FitResult:
    """Newton-Raphson fit on sufficient data; see :func:`fit_trend`."""
    _check_groups(data)
    start = default_start(data) if init is None else np.asarray(
        init.as_array() if isinstance(init, ModelParams) else init, dtype=float).copy()
    if not with_trend:
        start[1] = 0.0
    theta = np.empty(4)
    grad = np.empty(4)
    hess = np.empty((4, 4))
    status, iters, value, bound = K.unblinded_fit(
        data.counts, data.exposure, data.group, data.time_sum, data.count_tail,
        data.log_factorials, with_trend, start, max_iter, theta, grad, hess)
    converged = status == K.STATUS_OK
    if not np.all(np.isfinite(theta)) or not theta[3] > 0:
        theta = start
        converged = False
    est = ModelParams.from_array(theta)
    block = np.empty((3, 3))
    K.fisher_block(est.alpha0, est.alpha1, est.beta, est.phi, data.exposure, data.group,
                   np.ones(data.exposure.size), block)
    if not with_trend:
        block[1, :] = 0.0
        block[:, 1] = 0.0
    fisher = np.zeros((4, 4))
    fisher[:3, :3] = block
    if full_fisher and converged:
        means = trend_integral(est.alpha1, data.exposure) * np.exp(est.alpha0 + est.beta * data.group)
        fisher[3, 3] = expected_phi_information(means, est.phi)
    info = K.beta_information(block, with_trend) if converged else math.nan
    wald = est.beta * math.sqrt(info) if np.isfinite(info) else math.nan
    return FitResult(est, fisher, float(info), float(wald), bool(converged and np.isfinite(info)),
                     int(iters), float(value), bool(bound), with_trend, grad.copy())


def fit_trend(snap: Snapshot, init: ModelParams | None = None, max_iter: int = 100) -> FitResult:
    """Maximum-likelihood fit of the trend model to an unblinded snapshot.

    Newton-Raphson with step halving on the log-likelihood and the
    dispersion kept positive by truncating steps at half its value.  A fit
    whose dispersion ends on the lower bound is flagged ``at_phi_bound``.

    Raises:
        NoInformationError: no events, or a group without subjects.
    """
    return fit_arrays(SufficientData.from_snapshot(snap), True, init, max_iter)


def wald_decision(fit: FitResult, alpha: float = 0.025) -> bool:
    """One-sided superiority decision: reject when ``T < z_alpha`` (strict)."""
    if not fit.converged or not np.isfinite(fit.wald_statistic):
        raise DecisionUnavailableError("the fit did not converge")
    return bool(fit.wald_statistic < stats.norm.ppf(alpha))
