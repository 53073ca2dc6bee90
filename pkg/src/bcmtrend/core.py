"""Rate functions of the log-linear trend model with Gamma frailty.

Subjects in group ``i`` experience events from a non-homogeneous Poisson
process with intensity ``nu * exp(alpha0 + alpha1 * s) * exp(beta * x_i)``,
where ``s`` is study time (years since randomization), ``x_i`` is 1 for the
treatment group and 0 for control, and the frailty ``nu`` is Gamma with mean
1 and variance ``phi``.  Marginally the count up to study time ``s`` is
negative binomial with mean ``Lambda_i(s)`` and variance
``Lambda_i(s) * (1 + phi * Lambda_i(s))``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .errors import DomainError

# |alpha1 * s| below this uses the Taylor series of expm1(x)/x
SERIES_SWITCH = 1e-5
# lower bound for the dispersion in every estimation routine
PHI_MIN = 1e-8


class Group(enum.IntEnum):
    """Treatment arm; the integer value is the model indicator ``x``."""

    CONTROL = 0
    TREATMENT = 1

    @classmethod
    def parse(cls, value) -> "Group":
        if isinstance(value, Group):
            return value
        key = str(value).strip().lower()
        if key in ("t", "treatment", "1", "trt"):
            return cls.TREATMENT
        if key in ("c", "control", "0", "ctl", "ctrl"):
            return cls.CONTROL
        raise DomainError(f"unknown group label {value!r}")


@dataclass(frozen=True)
class ModelParams:
    """Parameter vector ``(alpha0, alpha1, beta, phi)`` of the trend model."""

    alpha0: float
    alpha1: float
    beta: float
    phi: float

    def __post_init__(self):
        for name in ("alpha0", "alpha1", "beta", "phi"):
            if not math.isfinite(getattr(self, name)):
                raise DomainError(f"{name} must be finite, got {getattr(self, name)!r}")
        if self.phi <= 0:
            raise DomainError(f"phi must be positive, got {self.phi!r}")

    def as_array(self) -> np.ndarray:
        return np.array([self.alpha0, self.alpha1, self.beta, self.phi])

    @classmethod
    def from_array(cls, values) -> "ModelParams":
        a0, a1, b, phi = (float(v) for v in values)
        return cls(a0, a1, b, phi)


@dataclass(frozen=True)
class AllocationWeights:
    """Randomization probabilities; the control weight is derived."""

    w_treatment: float = 0.5

    def __post_init__(self):
        if not (0.0 < self.w_treatment < 1.0):
            # degenerate allocations are admitted by the blinded formulas only
            if self.w_treatment not in (0.0, 1.0):
                raise DomainError(f"w_treatment must lie in [0, 1], got {self.w_treatment!r}")

    @property
    def w_control(self) -> float:
        return 1.0 - self.w_treatment

    def of(self, group: Group) -> float:
        return self.w_treatment if group == Group.TREATMENT else self.w_control


def _check_time(s):
    s = np.asarray(s, dtype=float)
    if not np.all(np.isfinite(s)):
        raise DomainError("study time must be finite")
    if np.any(s < 0):
        raise DomainError("study time must be non-negative")
    return s


def trend_integral(alpha1: float, s):
    """Return ``(exp(alpha1 * s) - 1) / alpha1``, continuous at ``alpha1 = 0``."""
    s = _check_time(s)
    x = alpha1 * s
    small = np.abs(x) < SERIES_SWITCH
    with np.errstate(divide="ignore", invalid="ignore"):
        closed = np.where(small, 0.0, np.expm1(x) / np.where(small, 1.0, alpha1))
    series = s * (1.0 + x / 2.0 + x * x / 6.0 + x * x * x / 24.0)
    out = np.where(small, series, closed)
    return out if out.ndim else float(out)


def rate(params: ModelParams, group: Group, s):
    """Event intensity ``lambda_i(s)`` without frailty."""
    s = _check_time(s)
    x = int(Group.parse(group))
    out = np.exp(params.alpha0 + params.alpha1 * s + params.beta * x)
    return out if out.ndim else float(out)


def cumulative_rate(params: ModelParams, group: Group, s):
    """Cumulative intensity ``Lambda_i(s)``; ``Lambda_i(0) = 0``."""
    x = int(Group.parse(group))
    g = trend_integral(params.alpha1, s)
    return g * math.exp(params.alpha0 + params.beta * x)


def blinded_multiplier(beta_h1: float, weights: AllocationWeights) -> float:
    """Factor ``w_T * exp(beta_h1) + w_C`` relating pooled and control rates."""
    return weights.w_treatment * math.exp(beta_h1) + weights.w_control


def blinded_cumulative_rate(params: ModelParams, beta_h1: float, weights: AllocationWeights, s):
    """Allocation-weighted cumulative rate of a blinded subject.

    Only the nuisance part ``(alpha0, alpha1)`` of ``params`` is used; the
    treatment effect is fixed at the planning alternative ``beta_h1``.
    """
    control = cumulative_rate(params, Group.CONTROL, s)
    return control * blinded_multiplier(beta_h1, weights)


def negbin_log_pmf(count, mean, phi):
    """Log mass of the negative binomial with given mean and dispersion ``phi``.

    ``P(N = k) = Gamma(k + 1/phi) / (Gamma(1/phi) k!) (phi m)^k / (1 + phi m)^(k + 1/phi)``.
    """
    count = np.asarray(count)
    mean = np.asarray(mean, dtype=float)
    phi = np.asarray(phi, dtype=float)
    if np.any(count < 0) or np.any(count != np.floor(count)):
        raise DomainError("count must be a non-negative integer")
    if np.any(~(mean > 0)) or np.any(~np.isfinite(mean)):
        raise DomainError("mean must be positive and finite")
    if np.any(~(phi > 0)) or np.any(~np.isfinite(phi)):
        raise DomainError("phi must be positive and finite")
    k = count.astype(float)
    k, mean, phi = np.broadcast_arrays(k, mean, phi)
    r = 1.0 / phi
    with np.errstate(over="ignore"):
        head = gammaln(k + r) - gammaln(r) + k * np.log(phi)
    near_poisson = phi < 1e-3
    if np.any(near_poisson):
        # lgamma(k + r) - lgamma(r) cancels catastrophically for large r
        head = np.array(head, dtype=float, copy=True)
        kk, pp = k[near_poisson], phi[near_poisson]
        j = np.arange(int(kk.max()) if kk.size else 0)
        terms = np.log1p(np.multiply.outer(pp, j)) * (j < kk[:, None])
        head[near_poisson] = terms.sum(axis=1)
    out = head - gammaln(k + 1.0) + k * np.log(mean) - (k + r) * np.log1p(phi * mean)
    return out if out.ndim else float(out)
