"""Blinded estimation of the nuisance parameters and of the information for ``beta``.

With group labels hidden, each subject's count is modelled either as a
two-component negative binomial mixture with the allocation probabilities as
weights (*mixture*), or as a single negative binomial whose cumulative rate is
the allocation-weighted average of the two group rates (*lumping*).  The
treatment effect is never estimated: it is fixed at the planning alternative
``beta_h1``, and only ``(alpha0, alpha1, phi)`` are fitted.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .core import AllocationWeights, ModelParams, trend_integral
from .errors import NoInformationError, SingularInformationError, ValidationError
from .simulation import Snapshot
from .trend import SufficientData, expected_phi_information


class BlindedMethod(enum.Enum):
    MIXTURE = "mixture"
    LUMPING = "lumping"

    @classmethod
    def parse(cls, value) -> "BlindedMethod":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower()
        for m in cls:
            if key in (m.value, m.name.lower(), m.value[:3]):
                return m
        raise ValidationError(f"unknown blinded method {value!r}", field="method")


def _mode(method: BlindedMethod, with_trend: bool) -> int:
    if method is BlindedMethod.MIXTURE:
        return K.MODE_TREND_MIX if with_trend else K.MODE_CONST_MIX
    return K.MODE_TREND_LUMP if with_trend else K.MODE_CONST_LUMP


@dataclass
class BlindedFit:
    """Blinded nuisance estimates; ``alpha0_b`` is the control-group intercept."""

    alpha0_b: float
    alpha1_b: float
    phi_b: float
    method: BlindedMethod
    converged: bool
    iterations: int = 0
    loglik: float = math.nan
    at_phi_bound: bool = False
    with_trend: bool = True

    def params(self, beta_h1: float) -> ModelParams:
        """Full parameter vector with the effect fixed at ``beta_h1``."""
        return ModelParams(self.alpha0_b, self.alpha1_b, beta_h1, self.phi_b)


@dataclass
class BlindedInformation:
    """Blinded Fisher matrix (order ``alpha0, alpha1, beta, phi``) and info for ``beta``."""

    info: float
    fisher_b: np.ndarray = field(repr=False)
    at_time: float = math.nan


def _blinded_data(snap: Snapshot) -> SufficientData:
    if snap.size == 0:
        raise ValidationError("snapshot is empty", field="exposure")
    if np.any(snap.exposure <= 0):
        raise ValidationError("every subject needs positive exposure", field="exposure")
    return SufficientData.from_arrays(snap.counts, snap.exposure, None, snap.time_sum)


def _nuisance_theta(nuisance, beta_h1: float) -> np.ndarray:
    if isinstance(nuisance, ModelParams):
        a0, a1, phi = nuisance.alpha0, nuisance.alpha1, nuisance.phi
    elif isinstance(nuisance, BlindedFit):
        a0, a1, phi = nuisance.alpha0_b, nuisance.alpha1_b, nuisance.phi_b
    else:
        a0, a1, phi = (float(v) for v in nuisance)
    if not phi > 0:
        raise ValidationError("phi must be positive", field="phi")
    return np.array([a0, a1, beta_h1, phi], dtype=float)


def _blinded_loglik(method: BlindedMethod, nuisance, beta_h1, weights: AllocationWeights,
                    snap: Snapshot) -> float:
    data = _blinded_data(snap)
    theta = _nuisance_theta(nuisance, beta_h1)
    comp_x, comp_f, comp_logw, _, _ = K._mode_setup(_mode(method, True), beta_h1, weights.w_treatment)
    grad = np.empty(4)
    hess = np.empty((4, 4))
    value = K.evaluate(theta, data.counts, data.exposure, np.empty(0), False, comp_x, comp_f,
                       comp_logw, data.total_events, data.time_sum, data.count_tail,
                       data.log_factorials, grad, hess)
    return float(value)


def loglik_mixture(nuisance, beta_h1: float, weights: AllocationWeights, snap: Snapshot) -> float:
    """Blinded log-likelihood under the two-component mixture.

    Each subject contributes ``w_T f_T + w_C f_C`` where ``f_i`` is the
    likelihood of its event times under group ``i`` with the treatment rate
    taken as the control rate times ``exp(beta_h1)``.

    Args:
        nuisance: ``(alpha0, alpha1, phi)``, a :class:`ModelParams` (``beta``
            ignored) or a :class:`BlindedFit`.
    """
    return _blinded_loglik(BlindedMethod.MIXTURE, nuisance, beta_h1, weights, snap)


def loglik_lumping(nuisance, beta_h1: float, weights: AllocationWeights, snap: Snapshot) -> float:
    """Blinded log-likelihood of the single-NB approximation with rate ``Lambda_(b)``."""
    return _blinded_loglik(BlindedMethod.LUMPING, nuisance, beta_h1, weights, snap)


def fit_blinded_arrays(data: SufficientData, method: BlindedMethod, beta_h1: float,
                       weights: AllocationWeights, init=None, with_trend: bool = True,
                       max_iter: int = 100) -> BlindedFit:
    if data.total_events <= 0:
        raise NoInformationError("snapshot contains no events")
    theta0 = np.zeros(4) if init is None else _nuisance_theta(init, beta_h1)
    theta = np.empty(4)
    status, iters, value, bound = K.blinded_fit(
        data.counts, data.exposure, data.time_sum if with_trend else 0.0, data.count_tail,
        _mode(method, with_trend), beta_h1, weights.w_treatment, theta0, init is not None,
        max_iter, theta)
    converged = status == K.STATUS_OK and bool(np.all(np.isfinite(theta)))
    if not converged and not (np.all(np.isfinite(theta)) and theta[3] > 0):
        theta = np.array([math.nan, math.nan, beta_h1, math.nan])
    value = float(value) + (-data.log_factorials if np.isfinite(value) else 0.0)
    return BlindedFit(float(theta[0]), float(theta[1]), float(theta[3]), method, converged,
                      int(iters), value, bool(bound), with_trend)


def fit_blinded_mixture(snap: Snapshot, beta_h1: float, weights: AllocationWeights,
                        init=None, with_trend: bool = True) -> BlindedFit:
    """Maximize :func:`loglik_mixture` over ``(alpha0, alpha1, phi)``.

    Newton-Raphson with analytic derivatives (the mixture Hessian includes
    the between-component variance term) and step halving.

    Raises:
        NoInformationError: the snapshot contains no events.
    """
    return fit_blinded_arrays(_blinded_data(snap), BlindedMethod.MIXTURE, beta_h1, weights,
                              init, with_trend)


def fit_blinded_lumping(snap: Snapshot, beta_h1: float, weights: AllocationWeights,
                        init=None, with_trend: bool = True) -> BlindedFit:
    """Maximize :func:`loglik_lumping` over ``(alpha0, alpha1, phi)``."""
    return fit_blinded_arrays(_blinded_data(snap), BlindedMethod.LUMPING, beta_h1, weights,
                              init, with_trend)


def blinded_fisher(bfit: BlindedFit, beta_h1: float, weights: AllocationWeights, exposures,
                   at_time: float = math.nan) -> BlindedInformation:
    """Blinded Fisher information at ``(alpha0_b, alpha1_b, beta_h1, phi_b)``.

    Every per-group sum of the expected information is replaced by the
    blinded exposures weighted with that group's allocation probability.

    Raises:
        SingularInformationError: information for ``beta`` is not positive,
            e.g. a zero treatment weight or no positive exposure.
    """
    if not bfit.converged:
        raise SingularInformationError("blinded fit did not converge")
    expo = np.ascontiguousarray(exposures, dtype=float)
    if expo.size == 0 or np.any(expo < 0):
        raise ValidationError("need non-negative exposures", field="exposure")
    w_t = weights.w_treatment
    block = np.empty((3, 3))
    K.blinded_fisher_block(bfit.alpha0_b, bfit.alpha1_b, beta_h1, bfit.phi_b, expo, w_t, block)
    if not bfit.with_trend:
        block[1, :] = 0.0
        block[:, 1] = 0.0
    info = K.beta_information(block, bfit.with_trend)
    if not (np.isfinite(info) and info > 0):
        raise SingularInformationError("blinded information for beta is not positive")
    fisher = np.zeros((4, 4))
    fisher[:3, :3] = block
    base = trend_integral(bfit.alpha1_b, expo) * math.exp(bfit.alpha0_b)
    phi_info = 0.0
    for w, mult in ((w_t, math.exp(beta_h1)), (1.0 - w_t, 1.0)):
        if w > 0:
            phi_info += w * expected_phi_information(base * mult, bfit.phi_b)
    fisher[3, 3] = phi_info
    return BlindedInformation(float(info), fisher, float(at_time))
