"""Interval boundaries, admissibility rules, and the cohort-expansion rule.

The toxicity side follows the optimal-interval construction: observed
toxicity rates are compared against two boundaries (lambda_e, lambda_d)
derived from the target rate phi_t and the sub-intervals
(phi1_factor * phi_t, phi2_factor * phi_t).  Safety and futility
admissibility are posterior tail checks with Beta(1, 1) priors.  The
cohort-expansion rule enlarges the next cohort whenever the next dose's
desirability probability clears the threshold theta.

Everything is pure and stateless; per-parameter results are memoized.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields
from functools import lru_cache
from math import ceil, floor, log

from .quasibeta import (
    Benchmark,
    ConfigurationError,
    UtilityWeights,
    benchmark_from,
    desirability_probability,
    quasi_events_from_marginals,
    tail_posterior,
)

__all__ = [
    "DesignParams",
    "BoundaryPair",
    "ConfigurationError",
    "interval_boundaries",
    "count_boundaries",
    "safety_eliminated",
    "futility_eliminated",
    "expansion_qualifies",
    "desirability_from_marginals",
    "params_to_dict",
    "params_from_dict",
]

# Elimination checks are skipped below this many observations at a dose.
MIN_N_FOR_ELIMINATION = 3


@dataclass(frozen=True)
class DesignParams:
    """All constants of one trial design.

    Dose levels are 1-based throughout the public surface.  ``adaptive``
    switches the cohort-expansion rule on; with it off the design reduces to
    the fixed cohort-size (base) design.
    """

    num_doses: int
    start_dose: int = 1
    phi_t: float = 0.35
    psi_e: float = 0.25
    weights: UtilityWeights = field(default_factory=UtilityWeights)
    safety_cutoff: float = 0.95
    futility_cutoff: float = 0.90
    theta: float = 0.20
    base_cohort: int = 3
    expanded_cohort: int = 6
    max_n: int = 36
    per_dose_stop_n: int = 12
    stop_rule_enabled: bool = True
    tox_window_days: float = 45.0
    eff_window_days: float = 60.0
    accrual_rate_per_month: float = 3.0
    phi1_factor: float = 0.6
    phi2_factor: float = 1.4
    adaptive: bool = True

    def __post_init__(self) -> None:
        if self.num_doses < 1:
            raise ValueError(f"num_doses must be >= 1, got {self.num_doses}")
        if not 1 <= self.start_dose <= self.num_doses:
            raise ValueError(
                f"start_dose must lie in 1..{self.num_doses}, got {self.start_dose}"
            )
        if not 0.0 < self.phi_t < 1.0 or not 0.0 < self.psi_e < 1.0:
            raise ValueError("phi_t and psi_e must lie in (0, 1)")
        if not 0.0 < self.theta < 1.0:
            raise ValueError(f"theta must lie in (0, 1), got {self.theta}")
        if self.base_cohort < 1 or self.expanded_cohort < self.base_cohort:
            raise ValueError("need 1 <= base_cohort <= expanded_cohort")
        if self.max_n < self.base_cohort:
            raise ValueError("max_n must allow at least one base cohort")
        if self.per_dose_stop_n > self.max_n:
            raise ValueError("per_dose_stop_n cannot exceed max_n")
        if self.accrual_rate_per_month <= 0.0:
            raise ValueError("accrual_rate_per_month must be positive")
        if self.tox_window_days < 0.0 or self.eff_window_days < 0.0:
            raise ValueError("assessment windows must be nonnegative")

    @property
    def benchmark(self) -> Benchmark:
        return benchmark_from(self.phi_t, self.psi_e, self.weights)


def params_to_dict(params: DesignParams) -> dict:
    """Plain-dict form of the design parameters, JSON-ready."""
    return asdict(params)


def params_from_dict(data: dict) -> DesignParams:
    """Rebuild DesignParams from its dict form, rejecting unknown keys."""
    data = dict(data)
    known = {f.name for f in fields(DesignParams)}
    unknown = set(data) - known
    if unknown:
        raise ValueError(f"unknown design parameter keys: {sorted(unknown)}")
    if "weights" in data and isinstance(data["weights"], dict):
        data["weights"] = UtilityWeights(**data["weights"])
    return DesignParams(**data)


@dataclass(frozen=True)
class BoundaryPair:
    """Escalation and de-escalation boundaries on the observed toxicity rate."""

    lambda_e: float
    lambda_d: float

    def __post_init__(self) -> None:
        if not 0.0 < self.lambda_e < self.lambda_d < 1.0:
            raise ValueError(
                f"need 0 < lambda_e < lambda_d < 1, got ({self.lambda_e}, {self.lambda_d})"
            )


@lru_cache(maxsize=None)
def _boundaries_for(phi_t: float, phi1_factor: float, phi2_factor: float) -> BoundaryPair:
    phi1 = phi1_factor * phi_t
    phi2 = phi2_factor * phi_t
    if not 0.0 < phi1 < phi_t < phi2 < 1.0:
        raise ValueError(
            f"degenerate toxicity intervals: need 0 < {phi1} < {phi_t} < {phi2} < 1"
        )
    lambda_e = log((1.0 - phi1) / (1.0 - phi_t)) / log(
        phi_t * (1.0 - phi1) / (phi1 * (1.0 - phi_t))
    )
    lambda_d = log((1.0 - phi_t) / (1.0 - phi2)) / log(
        phi2 * (1.0 - phi_t) / (phi_t * (1.0 - phi2))
    )
    return BoundaryPair(lambda_e=lambda_e, lambda_d=lambda_d)


def interval_boundaries(params: DesignParams) -> BoundaryPair:
    """Optimal-interval boundary rates (lambda_e, lambda_d) for the design."""
    return _boundaries_for(params.phi_t, params.phi1_factor, params.phi2_factor)


def count_boundaries(bp: BoundaryPair, n: int) -> tuple[int, int]:
    """Toxicity-count boundaries after n patients at a dose.

    Returns (escalate_if_tox_le, deescalate_if_tox_ge).  A toxicity rate
    exactly on lambda_d de-escalates, hence the ceiling on that side.
    """
    if n < 1:
        raise ValueError(f"count boundaries need n >= 1, got {n}")
    return floor(n * bp.lambda_e), ceil(n * bp.lambda_d)


@lru_cache(maxsize=None)
def _safety_tail(tox: int, n: int, phi_t: float) -> float:
    return tail_posterior(tox, n, phi_t, "above")


@lru_cache(maxsize=None)
def _futility_tail(eff: int, n: int, psi_e: float) -> float:
    return tail_posterior(eff, n, psi_e, "below")


def safety_eliminated(n: int, tox: int, params: DesignParams) -> bool:
    """True when the dose is too toxic: Pr(p_T > phi_t | data) > safety_cutoff.

    Applies only once the dose has at least three observations.
    """
    if tox > n:
        raise ValueError(f"tox={tox} exceeds n={n}")
    if n < MIN_N_FOR_ELIMINATION:
        return False
    return _safety_tail(tox, n, params.phi_t) > params.safety_cutoff


def futility_eliminated(n: int, eff: int, params: DesignParams) -> bool:
    """True when the dose is futile: Pr(p_E < psi_e | data) > futility_cutoff.

    Applies only once the dose has at least three observations.
    """
    if eff > n:
        raise ValueError(f"eff={eff} exceeds n={n}")
    if n < MIN_N_FOR_ELIMINATION:
        return False
    return _futility_tail(eff, n, params.psi_e) > params.futility_cutoff


@lru_cache(maxsize=None)
def _dp_from_marginals(
    n: int, tox: int, eff: int, weights: UtilityWeights, bench: Benchmark
) -> float:
    x_u = quasi_events_from_marginals(n, tox, eff, weights)
    return desirability_probability(n, x_u, bench)


def desirability_from_marginals(n: int, tox: int, eff: int, params: DesignParams) -> float:
    """Desirability probability of a dose summarized by (n, #tox, #eff)."""
    return _dp_from_marginals(n, tox, eff, params.weights, params.benchmark)


def expansion_qualifies(n: int, tox: int, eff: int, params: DesignParams) -> bool:
    """Whether the next cohort at a dose with data (n, tox, eff) may be expanded.

    Untried doses (n below one base cohort) never qualify; otherwise the dose
    qualifies when its desirability probability exceeds theta.  Requires
    weights under which the marginals determine x_u; configurations with a
    utility interaction must route through the full 2x2 table instead.
    """
    if tox < 0 or eff < 0 or tox > n or eff > n:
        raise ValueError(f"inconsistent counts n={n}, tox={tox}, eff={eff}")
    if n < params.base_cohort:
        return False
    return desirability_from_marginals(n, tox, eff, params) > params.theta
