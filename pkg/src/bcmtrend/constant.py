"""Constant-rate negative binomial model: the comparator without a time trend.

Each subject's count over exposure ``S`` is negative binomial with mean
``S * mu_i`` and dispersion ``varphi``.  The treatment effect is the
log-rate difference ``log(mu_T) - log(mu_C)``.  Fits reuse the trend-model
machinery with the trend pinned at zero, where ``alpha0 = log(mu_C)`` and
``beta = log(mu_T / mu_C)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .blinded import BlindedMethod, fit_blinded_arrays, _blinded_data
from .core import AllocationWeights, blinded_multiplier
from .errors import BoundaryError, DomainError, SingularInformationError, ValidationError
from .simulation import Snapshot
from .trend import FitResult, SufficientData, _as_group_exposures, fit_arrays


@dataclass(frozen=True)
class ConstParams:
    """Group rates per year and dispersion; ``varphi = 0`` is the Poisson limit."""

    mu_t: float
    mu_c: float
    varphi: float

    def __post_init__(self):
        for name in ("mu_t", "mu_c"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise DomainError(f"{name} must be positive and finite, got {v!r}")
        if not (self.varphi >= 0):
            raise DomainError(f"varphi must be non-negative, got {self.varphi!r}")

    @property
    def log_rate_difference(self) -> float:
        return math.log(self.mu_t) - math.log(self.mu_c)


def group_information(mu: float, varphi: float, exposures) -> float:
    """``sum_j S_j mu / (1 + varphi S_j mu)``."""
    m = np.asarray(exposures, dtype=float) * mu
    if math.isinf(varphi):
        return 0.0
    return float(np.sum(m / (1.0 + varphi * m)))


def _harmonic(i_t: float, i_c: float) -> float:
    if not (i_t > 0 and i_c > 0):
        raise SingularInformationError("a group carries no information")
    return 1.0 / (1.0 / i_t + 1.0 / i_c)


def info_const(params: ConstParams, exposures_by_group) -> float:
    """Information for the log-rate difference, ``1 / (1/I_T + 1/I_C)``.

    ``exposures_by_group`` is a ``{Group: exposures}`` mapping or a
    ``(treatment, control)`` pair.

    Raises:
        SingularInformationError: a group has no subject with positive exposure.
    """
    trt, ctl = _as_group_exposures(exposures_by_group)
    if np.any(trt < 0) or np.any(ctl < 0):
        raise ValidationError("exposures must be non-negative", field="exposure")
    return _harmonic(group_information(params.mu_t, params.varphi, trt),
                     group_information(params.mu_c, params.varphi, ctl))


@dataclass
class ConstFit:
    """Unblinded constant-rate fit.

    ``covariance`` is the inverse expected information for
    ``(log mu_T, log mu_C, varphi)``.
    """

    params: ConstParams
    covariance: np.ndarray = field(repr=False)
    log_rate_difference: float
    se: float
    wald_statistic: float
    converged: bool
    fit: FitResult = field(repr=False, default=None)


def fit_const_arrays(data: SufficientData, init=None) -> ConstFit:
    for g in (0.0, 1.0):
        if data.counts[data.group == g].sum() <= 0:
            raise BoundaryError("a group has no events; its rate estimate is zero")
    res = fit_arrays(data, with_trend=False, init=init)
    est = res.estimates
    cov = np.full((3, 3), math.nan)
    if res.converged:
        # (a0, beta) -> (log mu_T, log mu_C) = (a0 + beta, a0)
        inv = np.linalg.inv(res.fisher[np.ix_([0, 2], [0, 2])])
        jac = np.array([[1.0, 1.0], [1.0, 0.0]])
        cov[:2, :2] = jac @ inv @ jac.T
        cov[2, :2] = cov[:2, 2] = 0.0
        cov[2, 2] = 1.0 / res.fisher[3, 3] if res.fisher[3, 3] > 0 else math.nan
    params = ConstParams(math.exp(est.alpha0 + est.beta), math.exp(est.alpha0), est.phi)
    se = 1.0 / math.sqrt(res.information_beta) if res.converged else math.nan
    return ConstFit(params, cov, est.beta, se, res.wald_statistic, res.converged, res)


def fit_const_unblinded(snap: Snapshot, init=None) -> ConstFit:
    """Maximum-likelihood fit of the constant-rate model and its Wald statistic.

    Raises:
        BoundaryError: a group has no events.
        NoInformationError: a group has no subjects.
    """
    return fit_const_arrays(SufficientData.from_snapshot(snap), init)


@dataclass
class ConstBlindedFit:
    """Blinded constant-rate estimates; ``mu_b`` is the pooled rate (lumping only)."""

    mu_c: float
    mu_t: float
    varphi: float
    method: BlindedMethod
    converged: bool
    mu_b: float = math.nan

    def params(self) -> ConstParams:
        return ConstParams(self.mu_t, self.mu_c, self.varphi)


def fit_const_blinded(snap: Snapshot, beta_h1: float, weights: AllocationWeights,
                      method="lumping", init=None) -> ConstBlindedFit:
    """Blinded constant-rate fit with the effect fixed at ``beta_h1``.

    Lumping fits one negative binomial with mean ``S_j mu_b`` and splits
    ``mu_C = mu_b / (w_T exp(beta_h1) + w_C)``, ``mu_T = mu_C exp(beta_h1)``.
    Mixture maximizes the two-component likelihood with component rates
    ``mu_C exp(beta_h1)`` and ``mu_C``.

    Raises:
        NoInformationError: the snapshot contains no events.
    """
    method = BlindedMethod.parse(method)
    data = _blinded_data(snap)
    mult = blinded_multiplier(beta_h1, weights)
    if init is not None and isinstance(init, ConstBlindedFit):
        init = (math.log(init.mu_c), 0.0, init.varphi)
    bfit = fit_blinded_arrays(data, method, beta_h1, weights, init, with_trend=False)
    if not math.isfinite(bfit.alpha0_b):
        return ConstBlindedFit(math.nan, math.nan, math.nan, method, False)
    if method is BlindedMethod.LUMPING:
        mu_b = math.exp(bfit.alpha0_b) * mult
        mu_c = mu_b / mult
    else:
        mu_c = math.exp(bfit.alpha0_b)
        mu_b = math.nan
    return ConstBlindedFit(mu_c, mu_c * math.exp(beta_h1), bfit.phi_b, method, bfit.converged, mu_b)


def info_const_blinded(bfit: ConstBlindedFit, weights: AllocationWeights, exposures) -> float:
    """Blinded information ``1 / (1/I_(b)T + 1/I_(b)C)``.

    ``I_(b)i = w_i sum_j S_j mu_i / (1 + varphi S_j mu_i)`` over all blinded
    exposures.

    Raises:
        SingularInformationError: a zero allocation weight or no exposure.
    """
    expo = np.asarray(exposures, dtype=float)
    if np.any(expo < 0):
        raise ValidationError("exposures must be non-negative", field="exposure")
    if not bfit.converged:
        raise SingularInformationError("blinded fit did not converge")
    return _harmonic(weights.w_treatment * group_information(bfit.mu_t, bfit.varphi, expo),
                     weights.w_control * group_information(bfit.mu_c, bfit.varphi, expo))
