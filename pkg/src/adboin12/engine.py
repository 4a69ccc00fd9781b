"""Stateful conduct of a single dose-finding trial.

After each cohort's outcomes are recorded, the engine walks the
dose-assignment rules: update safety/futility eliminations, compare the
current dose's toxicity count against the interval boundaries to form
the candidate set, pick the candidate with the highest desirability
probability, apply the stopping rules, and size the next cohort
(expanded when the chosen dose's data clear the desirability threshold
and the expanded cohort still fits in the sample-size budget).

The same engine backs the simulator, the ``decide`` command, and the
HTTP service, so every surface issues identical recommendations.  One
instance is single-writer; run concurrent trials on separate instances.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from datetime import datetime, timezone
from functools import lru_cache

from .quasibeta import Benchmark, OutcomeCounts2x2, UtilityWeights, desirability_probability, quasi_events
from .rules import (
    DesignParams,
    count_boundaries,
    expansion_qualifies,
    futility_eliminated,
    interval_boundaries,
    params_from_dict,
    params_to_dict,
    safety_eliminated,
)

SCHEMA_VERSION = 1

STATUS_ACTIVE = "active"
STATUS_NO_ADMISSIBLE = "stopped_no_admissible"
STATUS_PER_DOSE_RULE = "stopped_per_dose_rule"
STATUS_MAX_N = "stopped_max_n"

_STOP_STATUSES = (STATUS_NO_ADMISSIBLE, STATUS_PER_DOSE_RULE, STATUS_MAX_N)


class TrialError(RuntimeError):
    """A request that violates the trial's current state.

    ``code`` is a stable machine-readable identifier used by the service
    layer to map violations onto HTTP responses.
    """

    def __init__(self, message: str, code: str = "STATE_VIOLATION"):
        super().__init__(message)
        self.code = code


@dataclass
class Decision:
    """One dose-assignment decision with its full rationale."""

    action: str  # escalate | stay | deescalate | stop
    next_dose: int | None
    next_cohort_size: int | None
    rationale: dict

    def to_dict(self) -> dict:
        return {
            "action": self.action,
            "next_dose": self.next_dose,
            "next_cohort_size": self.next_cohort_size,
            "rationale": self.rationale,
        }


@dataclass
class DoseRecord:
    """Accumulated 2x2 outcome counts and elimination flags for one dose."""

    a: int = 0
    b: int = 0
    c: int = 0
    d: int = 0
    eliminated_safety: bool = False
    eliminated_futility: bool = False

    @property
    def n(self) -> int:
        return self.a + self.b + self.c + self.d

    @property
    def n_tox(self) -> int:
        return self.b + self.d

    @property
    def n_eff(self) -> int:
        return self.a + self.b

    @property
    def admissible(self) -> bool:
        return not (self.eliminated_safety or self.eliminated_futility)

    def add(self, counts: OutcomeCounts2x2) -> None:
        self.a += counts.a
        self.b += counts.b
        self.c += counts.c
        self.d += counts.d


@lru_cache(maxsize=None)
def _dp_counts(
    a: int, b: int, c: int, d: int, weights: UtilityWeights, bench: Benchmark
) -> float:
    counts = OutcomeCounts2x2(a, b, c, d)
    return desirability_probability(counts.n, quasi_events(counts, weights), bench)


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


class TrialState:
    """Mutable state of one ongoing or finished trial."""

    def __init__(self, params: DesignParams, record_audit: bool = True):
        self.params = params
        self.doses = [DoseRecord() for _ in range(params.num_doses)]
        self.current_dose = params.start_dose
        self.enrolled_total = 0
        self.status = STATUS_ACTIVE
        self.audit: list[dict] = []
        self.pending_dose: int | None = params.start_dose
        self.pending_size: int | None = min(params.base_cohort, params.max_n)
        self.needs_decision = False
        self.record_audit = record_audit
        self._bench = params.benchmark
        self._bp = interval_boundaries(params)

    # -- helpers ---------------------------------------------------------

    def dose(self, level: int) -> DoseRecord:
        if not 1 <= level <= self.params.num_doses:
            raise TrialError(f"dose level {level} out of range", code="DOSE_OUT_OF_RANGE")
        return self.doses[level - 1]

    def dose_dp(self, level: int) -> float:
        """Desirability probability of a dose from its accumulated 2x2 data.

        An untried dose is scored by the prior: dp = 1 - u_tilde.
        """
        rec = self.dose(level)
        return _dp_counts(rec.a, rec.b, rec.c, rec.d, self.params.weights, self._bench)

    def copy(self) -> "TrialState":
        return copy.deepcopy(self)

    def _append_audit(self, event: str, payload: dict) -> None:
        if self.record_audit:
            self.audit.append(
                {"seq": len(self.audit) + 1, "ts": _now(), "event": event, **payload}
            )

    # -- trial conduct ----------------------------------------------------

    def record_cohort(self, dose: int, outcomes: OutcomeCounts2x2) -> "TrialState":
        """Accumulate one completed cohort's outcomes at the promised dose."""
        if self.status != STATUS_ACTIVE:
            raise TrialError("trial is stopped; no further cohorts", code="TRIAL_STOPPED")
        if dose != self.current_dose:
            raise TrialError(
                f"cohort dose {dose} does not match current dose {self.current_dose}",
                code="DOSE_MISMATCH",
            )
        if self.pending_size is not None and outcomes.n != self.pending_size:
            raise TrialError(
                f"cohort size {outcomes.n} does not match promised size {self.pending_size}",
                code="COHORT_SIZE_MISMATCH",
            )
        if self.enrolled_total + outcomes.n > self.params.max_n:
            raise TrialError(
                f"recording {outcomes.n} patients would exceed max_n={self.params.max_n}",
                code="ENROLLMENT_OVERFLOW",
            )
        self.dose(dose).add(outcomes)
        self.enrolled_total += outcomes.n
        self.needs_decision = True
        self._append_audit(
            "cohort",
            {"dose": dose, "a": outcomes.a, "b": outcomes.b, "c": outcomes.c, "d": outcomes.d},
        )
        return self

    def _update_eliminations(self) -> None:
        params = self.params
        safety_from: int | None = None
        for level in range(1, params.num_doses + 1):
            rec = self.dose(level)
            if rec.n == 0:
                continue
            if safety_eliminated(rec.n, rec.n_tox, params):
                safety_from = level if safety_from is None else min(safety_from, level)
            if futility_eliminated(rec.n, rec.n_eff, params):
                rec.eliminated_futility = True
        if safety_from is not None:
            # Toxicity is assumed monotone in dose: everything above goes too.
            for level in range(safety_from, params.num_doses + 1):
                self.dose(level).eliminated_safety = True

    def _stop(self, status: str, rationale: dict) -> Decision:
        self.status = status
        self.pending_dose = None
        self.pending_size = None
        self.needs_decision = False
        rationale = {**rationale, "stop_reason": status}
        decision = Decision(action="stop", next_dose=None, next_cohort_size=None, rationale=rationale)
        self._append_audit("decision", {"decision": decision.to_dict()})
        return decision

    def next_decision(self) -> Decision:
        """Decide the next dose and cohort size from the accumulated data."""
        if self.status != STATUS_ACTIVE:
            raise TrialError("trial is stopped; no decision to make", code="TRIAL_STOPPED")
        d = self.current_dose
        rec = self.dose(d)
        if rec.n == 0:
            raise TrialError(
                f"current dose {d} has no recorded cohort yet", code="NO_DATA_AT_CURRENT_DOSE"
            )
        params = self.params
        self.needs_decision = False

        # 1. Eliminations, then global admissibility.
        self._update_eliminations()
        eliminations = [
            {
                "dose": level,
                "safety": self.dose(level).eliminated_safety,
                "futility": self.dose(level).eliminated_futility,
            }
            for level in range(1, params.num_doses + 1)
            if not self.dose(level).admissible
        ]
        admissible = [
            level for level in range(1, params.num_doses + 1) if self.dose(level).admissible
        ]
        if self.dose(1).eliminated_safety or not admissible:
            return self._stop(STATUS_NO_ADMISSIBLE, {"eliminations": eliminations})

        # 2. Candidate set from the interval boundary comparison.
        n, tox = rec.n, rec.n_tox
        esc_le, deesc_ge = count_boundaries(self._bp, n)
        if tox >= deesc_ge:
            region = "deescalate"
            candidates = [d - 1] if d > 1 else [d]
        elif tox <= esc_le:
            region = "escalate"
            candidates = [d, d + 1]
        else:
            region = "stay"
            candidates = [d - 1, d]
        candidates = [
            c for c in candidates if 1 <= c <= params.num_doses and self.dose(c).admissible
        ]
        if not candidates:
            fallback = next(
                (c for c in range(d - 1, 0, -1) if self.dose(c).admissible), None
            )
            if fallback is None:
                return self._stop(
                    STATUS_NO_ADMISSIBLE,
                    {
                        "eliminations": eliminations,
                        "boundary": {
                            "n": n,
                            "tox": tox,
                            "escalate_if_tox_le": esc_le,
                            "deescalate_if_tox_ge": deesc_ge,
                            "region": region,
                        },
                    },
                )
            candidates = [fallback]

        # 3. Highest desirability probability wins; ties prefer the current
        #    dose, then the lower dose.  A mandatory de-escalation set is a
        #    singleton, so safety overrides desirability by construction.
        dp_by_dose = {c: self.dose_dp(c) for c in candidates}
        chosen = min(dp_by_dose, key=lambda c: (-dp_by_dose[c], c != d, c))

        rationale = {
            "boundary": {
                "n": n,
                "tox": tox,
                "escalate_if_tox_le": esc_le,
                "deescalate_if_tox_ge": deesc_ge,
                "region": region,
            },
            "candidates": {str(c): dp_by_dose[c] for c in sorted(dp_by_dose)},
            "eliminations": eliminations,
        }

        # 4. Stopping rules.
        if (
            params.stop_rule_enabled
            and chosen == d
            and rec.n >= params.per_dose_stop_n
        ):
            return self._stop(
                STATUS_PER_DOSE_RULE, {**rationale, "chosen_dose": chosen}
            )
        if self.enrolled_total >= params.max_n:
            return self._stop(STATUS_MAX_N, {**rationale, "chosen_dose": chosen})

        # 5. Cohort size for the chosen dose.  Expansion is withheld when the
        #    enlarged cohort would overrun the total budget, or (with the
        #    per-dose stopping rule active) overshoot the per-dose stopping
        #    boundary, which is meant to be reached exactly.
        chosen_rec = self.dose(chosen)
        remaining = params.max_n - self.enrolled_total
        qualifies = params.adaptive and expansion_qualifies(
            chosen_rec.n, chosen_rec.n_tox, chosen_rec.n_eff, params
        )
        capped_max_n = (
            qualifies and self.enrolled_total + params.expanded_cohort > params.max_n
        )
        capped_stop = (
            qualifies
            and params.stop_rule_enabled
            and chosen_rec.n + params.expanded_cohort > params.per_dose_stop_n
        )
        if qualifies and not capped_max_n and not capped_stop:
            size = params.expanded_cohort
        else:
            size = params.base_cohort if remaining >= params.base_cohort else remaining
        rationale["expansion"] = {
            "dose": chosen,
            "qualifies": qualifies,
            "dp": dp_by_dose.get(chosen, self.dose_dp(chosen)),
            "theta": params.theta,
            "capped_by_max_n": capped_max_n,
            "capped_by_stop_rule": capped_stop,
        }

        action = "escalate" if chosen > d else ("deescalate" if chosen < d else "stay")
        decision = Decision(
            action=action, next_dose=chosen, next_cohort_size=size, rationale=rationale
        )
        self.current_dose = chosen
        self.pending_dose = chosen
        self.pending_size = size
        self._append_audit("decision", {"decision": decision.to_dict()})
        return decision

    def final_selection(self) -> int | None:
        """Pick the best dose once the trial has stopped.

        Among doses with at least three patients that pass both
        admissibility checks, returns the one with the highest desirability
        probability (ties go to the lower dose); returns None when no dose
        qualifies.
        """
        if self.status == STATUS_ACTIVE:
            raise TrialError("final selection requires a stopped trial", code="TRIAL_ACTIVE")
        params = self.params
        best: int | None = None
        best_dp = -1.0
        for level in range(1, params.num_doses + 1):
            rec = self.dose(level)
            if rec.n < 3 or not rec.admissible:
                continue
            if safety_eliminated(rec.n, rec.n_tox, params):
                continue
            if futility_eliminated(rec.n, rec.n_eff, params):
                continue
            dp = self.dose_dp(level)
            if dp > best_dp:
                best, best_dp = level, dp
        return best

    # -- reporting ---------------------------------------------------------

    def last_decision(self) -> dict | None:
        for entry in reversed(self.audit):
            if entry["event"] == "decision":
                return entry["decision"]
        return None

    def dose_summaries(self) -> list[dict]:
        """Per-dose view rows: counts, desirability, elimination flags.

        Lets thin clients render the tally grid without doing any
        statistics themselves.
        """
        return [
            {
                "dose": level,
                "n": rec.n,
                "tox": rec.n_tox,
                "eff": rec.n_eff,
                "dp": self.dose_dp(level),
                "eliminated_safety": rec.eliminated_safety,
                "eliminated_futility": rec.eliminated_futility,
            }
            for level, rec in enumerate(self.doses, start=1)
        ]

    def current_recommendation(self) -> dict:
        """The recommendation a clinician should act on right now.

        If a cohort has been recorded but not yet decided on, the decision is
        computed on a scratch copy; the committed state is never mutated.
        """
        work = self
        if self.status == STATUS_ACTIVE and self.needs_decision:
            work = self.copy()
            work.next_decision()
        if work.status != STATUS_ACTIVE:
            return {
                "trial_stopped": True,
                "status": work.status,
                "final_selection": work.final_selection(),
                "decision": work.last_decision(),
            }
        return {
            "trial_stopped": False,
            "status": work.status,
            "next_dose": work.pending_dose,
            "next_cohort_size": work.pending_size,
            "decision": work.last_decision(),
        }

    # -- serialization ------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "params": params_to_dict(self.params),
            "doses": [
                {
                    "a": rec.a,
                    "b": rec.b,
                    "c": rec.c,
                    "d": rec.d,
                    "eliminated_safety": rec.eliminated_safety,
                    "eliminated_futility": rec.eliminated_futility,
                }
                for rec in self.doses
            ],
            "current_dose": self.current_dose,
            "enrolled_total": self.enrolled_total,
            "status": self.status,
            "pending_dose": self.pending_dose,
            "pending_size": self.pending_size,
            "needs_decision": self.needs_decision,
            "audit": self.audit,
        }

    def to_json(self, indent: int | None = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent)

    @classmethod
    def from_dict(cls, data: dict) -> "TrialState":
        if not isinstance(data, dict):
            raise ValueError("trial state document must be a JSON object")
        version = data.get("schema_version")
        if version != SCHEMA_VERSION:
            raise ValueError(f"unsupported schema_version {version!r}")
        required = {
            "params",
            "doses",
            "current_dose",
            "enrolled_total",
            "status",
            "pending_dose",
            "pending_size",
            "needs_decision",
            "audit",
        }
        missing = required - set(data)
        if missing:
            raise ValueError(f"trial state document missing keys: {sorted(missing)}")
        params = params_from_dict(data["params"])
        state = cls(params)
        if len(data["doses"]) != params.num_doses:
            raise ValueError("dose record count does not match num_doses")
        state.doses = [
            DoseRecord(
                a=int(rec["a"]),
                b=int(rec["b"]),
                c=int(rec["c"]),
                d=int(rec["d"]),
                eliminated_safety=bool(rec["eliminated_safety"]),
                eliminated_futility=bool(rec["eliminated_futility"]),
            )
            for rec in data["doses"]
        ]
        if data["status"] not in (STATUS_ACTIVE,) + _STOP_STATUSES:
            raise ValueError(f"unknown trial status {data['status']!r}")
        state.current_dose = int(data["current_dose"])
        state.enrolled_total = int(data["enrolled_total"])
        state.status = data["status"]
        state.pending_dose = data["pending_dose"]
        state.pending_size = data["pending_size"]
        state.needs_decision = bool(data["needs_decision"])
        state.audit = list(data["audit"])
        if state.enrolled_total != sum(rec.n for rec in state.doses):
            raise ValueError("enrolled_total inconsistent with per-dose counts")
        if state.enrolled_total > params.max_n:
            raise ValueError("enrolled_total exceeds max_n")
        return state

    @classmethod
    def from_json(cls, text: str) -> "TrialState":
        return cls.from_dict(json.loads(text))

    @classmethod
    def replay(cls, params: DesignParams, cohorts: list[tuple[int, OutcomeCounts2x2]]) -> "TrialState":
        """Rebuild a trial by feeding recorded cohorts through a fresh engine."""
        state = cls(params)
        for dose, outcomes in cohorts:
            state.record_cohort(dose, outcomes)
            state.next_decision()
        return state
