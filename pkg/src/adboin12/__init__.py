"""Utility-based phase I/II dose finding with adaptive cohort sizing.

Implements the BOIN12 decision rules (interval toxicity boundaries plus
quasi-binomial desirability posteriors) together with an adaptive
cohort-size extension that enlarges the next cohort when the chosen
dose's desirability probability clears a threshold, shortening trials
without degrading dose selection.  Ships protocol table generation, a
trial-conduct engine, a Monte Carlo operating-characteristics
simulator, a CLI, and a local JSON-over-HTTP decision service.
"""

from .engine import Decision, DoseRecord, TrialError, TrialState
from .quasibeta import (
    Benchmark,
    ConfigurationError,
    OutcomeCounts2x2,
    UtilityWeights,
    benchmark_from,
    desirability_probability,
    quasi_events,
    quasi_events_from_marginals,
    regularized_incomplete_beta,
    tail_posterior,
)
from .rules import (
    BoundaryPair,
    DesignParams,
    count_boundaries,
    expansion_qualifies,
    futility_eliminated,
    interval_boundaries,
    safety_eliminated,
)
from .simulate import (
    OperatingChars,
    Scenario,
    TrialResult,
    case_params,
    compare_designs,
    load_scenario_bank,
    run_monte_carlo,
    simulate_trial,
)
from .tables import expansion_table, rds_table, safety_table

__version__ = "0.1.0"

__all__ = [
    "Benchmark",
    "BoundaryPair",
    "ConfigurationError",
    "Decision",
    "DesignParams",
    "DoseRecord",
    "OperatingChars",
    "OutcomeCounts2x2",
    "Scenario",
    "TrialError",
    "TrialResult",
    "TrialState",
    "UtilityWeights",
    "benchmark_from",
    "case_params",
    "compare_designs",
    "count_boundaries",
    "desirability_probability",
    "expansion_qualifies",
    "expansion_table",
    "futility_eliminated",
    "interval_boundaries",
    "load_scenario_bank",
    "quasi_events",
    "quasi_events_from_marginals",
    "rds_table",
    "regularized_incomplete_beta",
    "run_monte_carlo",
    "safety_eliminated",
    "safety_table",
    "simulate_trial",
    "tail_posterior",
    "__version__",
]
