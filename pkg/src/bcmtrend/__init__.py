"""Blinded continuous information monitoring for recurrent-event trials with time trends.

Event counts follow a negative binomial model whose rate changes log-linearly
with study time.  The package simulates such trials, estimates the nuisance
parameters from blinded data (mixture or lumping), monitors the blinded
information for the treatment effect, and analyses the unblinded data with a
Wald test.  A constant-rate comparator procedure is included.
"""

from .blinded import (
    BlindedFit,
    BlindedInformation,
    BlindedMethod,
    blinded_fisher,
    fit_blinded_lumping,
    fit_blinded_mixture,
    loglik_lumping,
    loglik_mixture,
)
from .constant import (
    ConstBlindedFit,
    ConstFit,
    ConstParams,
    fit_const_blinded,
    fit_const_unblinded,
    info_const,
    info_const_blinded,
)
from .core import (
    AllocationWeights,
    Group,
    ModelParams,
    blinded_cumulative_rate,
    cumulative_rate,
    negbin_log_pmf,
    rate,
    trend_integral,
)
from .errors import (
    BcmError,
    BoundaryError,
    ConvergenceError,
    DecisionUnavailableError,
    DomainError,
    EvaluationError,
    NoInformationError,
    NumericalError,
    SingularInformationError,
    ValidationError,
)
from .harness import (
    Scenario,
    ScenarioSummary,
    information_curve,
    load_blinded_events,
    load_config,
    run_scenario,
    solve_alpha0,
)
from .monitoring import (
    MonitoringOutcome,
    MonitoringSpec,
    Procedure,
    run_monitored_trial,
    target_information,
)
from .simulation import (
    Snapshot,
    SubjectPath,
    TrialDesign,
    draw_frailty,
    simulate_subject,
    simulate_trial,
    snapshot,
)
from .trend import FitResult, fisher_trend, fit_trend, loglik_trend, score_trend, wald_decision

__version__ = "0.1.0"

__all__ = [
    "AllocationWeights",
    "BcmError",
    "blinded_cumulative_rate",
    "blinded_fisher",
    "BlindedFit",
    "BlindedInformation",
    "BlindedMethod",
    "BoundaryError",
    "ConstBlindedFit",
    "ConstFit",
    "ConstParams",
    "ConvergenceError",
    "cumulative_rate",
    "DecisionUnavailableError",
    "DomainError",
    "draw_frailty",
    "EvaluationError",
    "fisher_trend",
    "fit_blinded_lumping",
    "fit_blinded_mixture",
    "fit_const_blinded",
    "fit_const_unblinded",
    "fit_trend",
    "FitResult",
    "Group",
    "info_const",
    "info_const_blinded",
    "information_curve",
    "load_blinded_events",
    "load_config",
    "loglik_lumping",
    "loglik_mixture",
    "loglik_trend",
    "ModelParams",
    "MonitoringOutcome",
    "MonitoringSpec",
    "negbin_log_pmf",
    "NoInformationError",
    "NumericalError",
    "Procedure",
    "rate",
    "run_monitored_trial",
    "run_scenario",
    "Scenario",
    "ScenarioSummary",
    "score_trend",
    "simulate_subject",
    "simulate_trial",
    "SingularInformationError",
    "Snapshot",
    "snapshot",
    "solve_alpha0",
    "SubjectPath",
    "target_information",
    "trend_integral",
    "TrialDesign",
    "ValidationError",
    "wald_decision",
]
