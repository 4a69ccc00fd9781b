"""Monte Carlo evaluation of operating characteristics.

Each replicate simulates one trial on a calendar: patients arrive by a
Poisson process (exponential inter-arrival times), each cohort's
decision happens one full assessment window after its last enrollment,
and accrual suspends while outcomes are awaited.  Replicates draw from
independent generators derived deterministically from
(master_seed, scenario_index, replicate), so results are reproducible
and independent of execution order, thread count, and design compared.

Design comparisons reuse the same per-replicate streams for both
designs (common random numbers), which makes paired differences exact
rather than noisy re-randomizations.
"""

from __future__ import annotations

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from importlib import resources
from math import fsum

import numpy as np

from .engine import TrialState
from .quasibeta import OutcomeCounts2x2
from .rules import DesignParams

BUNDLED_BANK = "scenarios16.json"


@dataclass(frozen=True)
class Scenario:
    """True per-dose outcome probabilities, with the target dose declared.

    ``true_obd`` is a 1-based dose level, None when no dose is acceptable
    (the correct trial outcome is then stopping without a selection), or
    the string "derived" to compute the truth from the probabilities.
    """

    name: str
    p_tox: tuple[float, ...]
    p_eff: tuple[float, ...]
    true_obd: int | None | str = "derived"

    def __post_init__(self) -> None:
        if len(self.p_tox) != len(self.p_eff):
            raise ValueError(f"scenario {self.name}: pT and pE lengths differ")
        for p in (*self.p_tox, *self.p_eff):
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"scenario {self.name}: probability {p} outside [0, 1]")
        if isinstance(self.true_obd, str) and self.true_obd != "derived":
            raise ValueError(f"scenario {self.name}: bad true_obd {self.true_obd!r}")
        if isinstance(self.true_obd, int) and not 1 <= self.true_obd <= len(self.p_tox):
            raise ValueError(f"scenario {self.name}: true_obd {self.true_obd} out of range")

    @property
    def num_doses(self) -> int:
        return len(self.p_tox)

    def expected_utilities(self, params: DesignParams) -> list[float]:
        w = params.weights
        return [
            w.eff_no_tox * pe * (1.0 - pt)
            + w.eff_tox * pe * pt
            + w.no_eff_no_tox * (1.0 - pe) * (1.0 - pt)
            + w.no_eff_tox * (1.0 - pe) * pt
            for pt, pe in zip(self.p_tox, self.p_eff)
        ]

    def resolved_obd(self, params: DesignParams) -> int | None:
        """The correct selection: highest expected utility among doses that
        are both tolerable (pT <= phi_t) and active (pE >= psi_e)."""
        if self.true_obd != "derived":
            return self.true_obd
        utilities = self.expected_utilities(params)
        best: int | None = None
        best_u = -1.0
        for level in range(1, self.num_doses + 1):
            if self.p_tox[level - 1] > params.phi_t:
                continue
            if self.p_eff[level - 1] < params.psi_e:
                continue
            if utilities[level - 1] > best_u:
                best, best_u = level, utilities[level - 1]
        return best

    def toxic_doses(self, params: DesignParams) -> list[int]:
        return [
            level
            for level in range(1, self.num_doses + 1)
            if self.p_tox[level - 1] > params.phi_t
        ]


@dataclass(frozen=True)
class TrialResult:
    """Outcome of a single simulated trial."""

    selected_obd: int | None
    duration_days: float
    per_dose_n: tuple[int, ...]
    stop_reason: str
    seed_id: int


@dataclass(frozen=True)
class OperatingChars:
    """Aggregated metrics over a set of replicates."""

    pct_correct_obd: float
    mean_duration_months: float
    mean_n_at_correct_obd: float
    mean_n_at_toxic_doses: float
    replicates: int


def simulate_trial(
    scenario: Scenario, params: DesignParams, seed, seed_id: int | None = None
) -> TrialResult:
    """Run one trial to completion on a simulated calendar.

    ``seed`` is anything ``numpy.random.default_rng`` accepts; pass a
    (master_seed, scenario_index, replicate) tuple for reproducible streams.
    """
    if scenario.num_doses != params.num_doses:
        raise ValueError(
            f"scenario has {scenario.num_doses} doses but params expect {params.num_doses}"
        )
    rng = np.random.default_rng(seed)
    state = TrialState(params, record_audit=False)
    mean_gap = 30.0 / params.accrual_rate_per_month
    window = max(params.tox_window_days, params.eff_window_days)
    clock = 0.0
    while state.status == "active":
        dose, size = state.pending_dose, state.pending_size
        gaps = rng.exponential(mean_gap, size)
        tox = rng.random(size) < scenario.p_tox[dose - 1]
        eff = rng.random(size) < scenario.p_eff[dose - 1]
        clock += float(gaps.sum())  # last enrollment of the cohort
        a = int(np.count_nonzero(eff & ~tox))
        b = int(np.count_nonzero(eff & tox))
        d = int(np.count_nonzero(~eff & tox))
        c = size - a - b - d
        state.record_cohort(dose, OutcomeCounts2x2(a=a, b=b, c=c, d=d))
        clock += window  # outcomes known; decision happens now
        state.next_decision()
    if seed_id is None:
        seed_id = seed if isinstance(seed, int) else int(seed[-1])
    return TrialResult(
        selected_obd=state.final_selection(),
        duration_days=clock,
        per_dose_n=tuple(rec.n for rec in state.doses),
        stop_reason=state.status,
        seed_id=seed_id,
    )


def _simulate_block(
    scenario: Scenario,
    params: DesignParams,
    master_seed: int,
    scenario_index: int,
    start: int,
    stop: int,
) -> list[TrialResult]:
    return [
        simulate_trial(scenario, params, (master_seed, scenario_index, r), seed_id=r)
        for r in range(start, stop)
    ]


def replicate_results(
    scenario: Scenario,
    params: DesignParams,
    replicates: int,
    master_seed: int,
    threads: int = 1,
    scenario_index: int = 0,
) -> list[TrialResult]:
    """All per-replicate results, in replicate order regardless of threading."""
    if replicates < 1:
        raise ValueError(f"replicates must be >= 1, got {replicates}")
    if threads <= 1 or replicates < 2 * threads:
        return _simulate_block(scenario, params, master_seed, scenario_index, 0, replicates)
    bounds = np.linspace(0, replicates, threads + 1, dtype=int)
    results: list[TrialResult] = []
    with ProcessPoolExecutor(max_workers=threads) as pool:
        futures = [
            pool.submit(
                _simulate_block,
                scenario,
                params,
                master_seed,
                scenario_index,
                int(bounds[i]),
                int(bounds[i + 1]),
            )
            for i in range(threads)
        ]
        for future in futures:
            results.extend(future.result())
    return results


def aggregate_results(
    results: list[TrialResult], scenario: Scenario, params: DesignParams
) -> OperatingChars:
    """Reduce per-replicate results to the four operating characteristics.

    Uses exact summation, so the aggregate is identical under any ordering
    of the replicate results.
    """
    reps = len(results)
    truth = scenario.resolved_obd(params)
    toxic = scenario.toxic_doses(params)
    correct = sum(1 for r in results if r.selected_obd == truth)
    mean_duration = fsum(r.duration_days for r in results) / reps / 30.0
    if truth is None:
        mean_n_correct = 0.0
    else:
        mean_n_correct = fsum(r.per_dose_n[truth - 1] for r in results) / reps
    mean_n_toxic = (
        fsum(sum(r.per_dose_n[t - 1] for t in toxic) for r in results) / reps
        if toxic
        else 0.0
    )
    return OperatingChars(
        pct_correct_obd=100.0 * correct / reps,
        mean_duration_months=mean_duration,
        mean_n_at_correct_obd=mean_n_correct,
        mean_n_at_toxic_doses=mean_n_toxic,
        replicates=reps,
    )


def run_monte_carlo(
    scenario: Scenario,
    params: DesignParams,
    replicates: int,
    master_seed: int,
    threads: int = 1,
    scenario_index: int = 0,
) -> OperatingChars:
    results = replicate_results(
        scenario, params, replicates, master_seed, threads, scenario_index
    )
    return aggregate_results(results, scenario, params)


@dataclass(frozen=True)
class DesignComparison:
    """Paired operating characteristics of two designs on one scenario."""

    scenario: str
    adaptive: OperatingChars
    base: OperatingChars
    diffs: dict


def _paired_diffs(ad: OperatingChars, base: OperatingChars) -> dict:
    if base.mean_duration_months > 0.0:
        reduction = (
            100.0
            * (base.mean_duration_months - ad.mean_duration_months)
            / base.mean_duration_months
        )
    else:
        reduction = 0.0
    return {
        "pct_correct_obd": ad.pct_correct_obd - base.pct_correct_obd,
        "mean_duration_months": ad.mean_duration_months - base.mean_duration_months,
        "duration_reduction_pct": reduction,
        "mean_n_at_correct_obd": ad.mean_n_at_correct_obd - base.mean_n_at_correct_obd,
        "mean_n_at_toxic_doses": ad.mean_n_at_toxic_doses - base.mean_n_at_toxic_doses,
    }


def compare_designs(
    scenarios: list[Scenario],
    params_ad: DesignParams,
    params_base: DesignParams,
    replicates: int,
    master_seed: int,
    threads: int = 1,
) -> list[DesignComparison]:
    """Run both designs on every scenario with common random numbers."""
    if params_ad.num_doses != params_base.num_doses:
        raise ValueError("designs must cover the same number of doses")
    comparisons = []
    for index, scenario in enumerate(scenarios):
        if scenario.num_doses != params_ad.num_doses:
            raise ValueError(
                f"scenario {scenario.name} has {scenario.num_doses} doses, "
                f"designs expect {params_ad.num_doses}"
            )
        ad_results = replicate_results(
            scenario, params_ad, replicates, master_seed, threads, index
        )
        base_results = replicate_results(
            scenario, params_base, replicates, master_seed, threads, index
        )
        ad = aggregate_results(ad_results, scenario, params_ad)
        base = aggregate_results(base_results, scenario, params_base)
        comparisons.append(
            DesignComparison(
                scenario=scenario.name, adaptive=ad, base=base, diffs=_paired_diffs(ad, base)
            )
        )
    return comparisons


def average_diffs(comparisons: list[DesignComparison]) -> dict:
    """Scenario-averaged paired differences."""
    keys = [
        "pct_correct_obd",
        "mean_duration_months",
        "duration_reduction_pct",
        "mean_n_at_correct_obd",
        "mean_n_at_toxic_doses",
    ]
    return {k: fsum(c.diffs[k] for c in comparisons) / len(comparisons) for k in keys}


def case_params(case: str, num_doses: int = 5, max_n: int = 36, **overrides) -> DesignParams:
    """Standard evaluation configurations.

    A: per-dose stopping rule on, 60-day efficacy window.
    B: stopping rule off, 60-day efficacy window.
    C: stopping rule on, 30-day efficacy window.
    D: stopping rule off, 30-day efficacy window.
    """
    case = case.upper()
    if case not in ("A", "B", "C", "D"):
        raise ValueError(f"case must be one of A, B, C, D; got {case!r}")
    settings = dict(
        num_doses=num_doses,
        max_n=max_n,
        stop_rule_enabled=case in ("A", "C"),
        eff_window_days=60.0 if case in ("A", "B") else 30.0,
        tox_window_days=45.0,
    )
    settings.update(overrides)
    return DesignParams(**settings)


def scenarios_from_dict(data: dict) -> list[Scenario]:
    if "scenarios" not in data or not isinstance(data["scenarios"], list):
        raise ValueError('scenario bank must be an object with a "scenarios" list')
    bank = []
    for item in data["scenarios"]:
        missing = {"name", "pT", "pE"} - set(item)
        if missing:
            raise ValueError(f"scenario entry missing keys: {sorted(missing)}")
        bank.append(
            Scenario(
                name=str(item["name"]),
                p_tox=tuple(float(p) for p in item["pT"]),
                p_eff=tuple(float(p) for p in item["pE"]),
                true_obd=item.get("true_obd", "derived"),
            )
        )
    if not bank:
        raise ValueError("scenario bank is empty")
    return bank


def load_scenario_bank(path: str | None = None) -> list[Scenario]:
    """Load scenarios from a JSON file, or the bundled 16-scenario bank."""
    if path is None:
        text = resources.files("adboin12").joinpath("data", BUNDLED_BANK).read_text()
    else:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    return scenarios_from_dict(json.loads(text))
