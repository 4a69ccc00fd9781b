"""Trial-conduct engine: dose assignment, stopping, selection, replay."""

import json

import numpy as np
import pytest

from adboin12.engine import (
    STATUS_ACTIVE,
    STATUS_MAX_N,
    STATUS_NO_ADMISSIBLE,
    STATUS_PER_DOSE_RULE,
    Decision,
    DoseRecord,
    TrialError,
    TrialState,
)
from adboin12.quasibeta import OutcomeCounts2x2
from adboin12.rules import DesignParams

P18 = DesignParams(num_doses=5, max_n=18, stop_rule_enabled=False)


def cohort(a=0, b=0, c=0, d=0):
    return OutcomeCounts2x2(a=a, b=b, c=c, d=d)


# ---------------------------------------------------------------------------
# recording
# ---------------------------------------------------------------------------

def test_record_first_cohort():
    st = TrialState(P18)
    st.record_cohort(1, cohort(a=1, c=2))
    rec = st.dose(1)
    assert (rec.n, rec.n_tox, rec.n_eff) == (3, 0, 1)
    assert st.enrolled_total == 3


def test_record_wrong_dose_rejected():
    st = TrialState(P18)
    with pytest.raises(TrialError) as err:
        st.record_cohort(2, cohort(c=3))
    assert err.value.code == "DOSE_MISMATCH"


def test_record_wrong_size_rejected():
    st = TrialState(P18)
    with pytest.raises(TrialError) as err:
        st.record_cohort(1, cohort(c=4))
    assert err.value.code == "COHORT_SIZE_MISMATCH"


def test_record_on_stopped_trial_rejected():
    st = TrialState(DesignParams(num_doses=1, max_n=3, per_dose_stop_n=3, stop_rule_enabled=False))
    st.record_cohort(1, cohort(a=3))
    st.next_decision()
    assert st.status == STATUS_MAX_N
    with pytest.raises(TrialError) as err:
        st.record_cohort(1, cohort(a=3))
    assert err.value.code == "TRIAL_STOPPED"


def test_expanded_cohort_accepted_after_expansion_decision():
    st = TrialState(P18)
    st.record_cohort(1, cohort(a=2, c=1))  # (3, 0 tox, 2 eff): dp 0.50, stays
    decision = st.next_decision()
    assert decision.next_cohort_size == 6
    st.record_cohort(decision.next_dose, cohort(a=3, c=3))
    assert st.enrolled_total == 9


# ---------------------------------------------------------------------------
# dose-assignment walkthrough
# ---------------------------------------------------------------------------

def test_first_cohort_escalates_to_untried_dose():
    # (3, 0 tox, 1 eff) at dose 1: dp 0.2691 loses to the untried prior 0.295.
    st = TrialState(P18)
    st.record_cohort(1, cohort(a=1, c=2))
    decision = st.next_decision()
    assert decision.action == "escalate"
    assert decision.next_dose == 2
    assert decision.next_cohort_size == 3
    assert decision.rationale["boundary"]["region"] == "escalate"
    assert decision.rationale["expansion"]["qualifies"] is False


def test_qualifying_dose_gets_expanded_cohort():
    st = TrialState(P18)
    st.record_cohort(1, cohort(a=2, c=1))  # meets the expansion condition
    decision = st.next_decision()
    assert decision.action == "stay"
    assert decision.next_dose == 1
    assert decision.next_cohort_size == 6
    assert decision.rationale["expansion"]["qualifies"] is True


def test_expansion_capped_by_remaining_budget():
    # 15 of 18 enrolled; the chosen dose qualifies but 15 + 6 > 18.
    st = TrialState(P18)
    st.record_cohort(1, cohort(a=1, c=2))
    assert st.next_decision().next_dose == 2
    st.record_cohort(2, cohort(a=1, c=2))
    # force a walk that accumulates data: dose 2 again at size 3 or 6
    d = st.next_decision()
    while st.enrolled_total < 15 and st.status == STATUS_ACTIVE:
        st.record_cohort(d.next_dose, cohort(a=1, c=d.next_cohort_size - 1))
        d = st.next_decision()
    assert st.enrolled_total == 15
    assert d.next_cohort_size == 3
    assert d.rationale["expansion"]["qualifies"] is True
    assert d.rationale["expansion"]["capped_by_max_n"] is True


def test_mandatory_deescalation_ignores_desirability():
    st = TrialState(P18)
    st.record_cohort(1, cohort(a=2, c=1))
    st.next_decision()  # stay at 1, expanded to 6
    st.record_cohort(1, cohort(b=3, d=3))  # 6/6 toxicities on the expansion
    decision = st.next_decision()
    # dose 1 now has 9 patients, 6 tox >= de-escalation bound 4, but dose 1
    # is the lowest dose: candidate set collapses to dose 1 itself unless
    # eliminated -- here (9, 6 tox) is safety-eliminated, so the trial stops.
    assert decision.action == "stop"
    assert st.status == STATUS_NO_ADMISSIBLE


def test_deescalation_moves_down_one_level():
    st = TrialState(P18)
    st.record_cohort(1, cohort(a=1, c=2))
    assert st.next_decision().next_dose == 2
    st.record_cohort(2, cohort(a=2, b=1))  # (3, 1 tox, 3 eff): stay region
    decision = st.next_decision()
    assert decision.action in ("stay", "deescalate")
    st2 = TrialState(P18)
    st2.record_cohort(1, cohort(a=1, c=2))
    st2.next_decision()
    st2.record_cohort(2, cohort(b=2, d=1))  # 3 tox of 3: mandatory de-escalation
    decision2 = st2.next_decision()
    assert decision2.action == "deescalate"
    assert decision2.next_dose == 1


def test_safety_elimination_cascades_upward():
    st = TrialState(P18)
    st.record_cohort(1, cohort(a=1, c=2))
    assert st.next_decision().next_dose == 2
    st.record_cohort(2, cohort(b=3))  # 3/3 tox at dose 2
    decision = st.next_decision()
    assert st.dose(2).eliminated_safety
    assert st.dose(3).eliminated_safety
    assert st.dose(4).eliminated_safety
    assert st.dose(5).eliminated_safety
    assert not st.dose(1).eliminated_safety
    assert decision.action == "deescalate"
    assert decision.next_dose == 1


def test_futility_elimination_is_dose_local():
    st = TrialState(DesignParams(num_doses=3, max_n=36, stop_rule_enabled=False))
    st.doses[0] = DoseRecord(c=9)  # nine patients, zero responses at dose 1
    st.enrolled_total = 9
    decision = st.next_decision()
    assert st.dose(1).eliminated_futility
    assert not st.dose(2).eliminated_futility
    assert not st.dose(3).eliminated_futility
    # dose 1 leaves the candidate set but the trial moves on
    assert decision.action == "escalate"
    assert decision.next_dose == 2


def test_lowest_dose_safety_elimination_stops_trial():
    st = TrialState(P18)
    st.record_cohort(1, cohort(b=3))
    decision = st.next_decision()
    assert decision.action == "stop"
    assert st.status == STATUS_NO_ADMISSIBLE
    assert st.final_selection() is None


def test_per_dose_stopping_rule():
    params = DesignParams(num_doses=1, max_n=36, stop_rule_enabled=True)
    st = TrialState(params)
    while st.status == STATUS_ACTIVE:
        st.record_cohort(1, cohort(a=st.pending_size))
        decision = st.next_decision()
    assert st.status == STATUS_PER_DOSE_RULE
    assert st.dose(1).n >= 12
    assert decision.action == "stop"


def test_stop_rule_disabled_runs_to_max_n():
    params = DesignParams(num_doses=1, max_n=36, stop_rule_enabled=False)
    st = TrialState(params)
    while st.status == STATUS_ACTIVE:
        st.record_cohort(1, cohort(a=st.pending_size))
        st.next_decision()
    assert st.status == STATUS_MAX_N
    assert st.enrolled_total == 36


def test_decision_on_stopped_trial_rejected():
    st = TrialState(P18)
    st.record_cohort(1, cohort(b=3))
    st.next_decision()
    with pytest.raises(TrialError):
        st.next_decision()


def test_decision_requires_data_at_current_dose():
    st = TrialState(P18)
    with pytest.raises(TrialError) as err:
        st.next_decision()
    assert err.value.code == "NO_DATA_AT_CURRENT_DOSE"


# ---------------------------------------------------------------------------
# final selection
# ---------------------------------------------------------------------------

def _stopped_state(dose_records, params=None):
    params = params or DesignParams(num_doses=len(dose_records), max_n=36)
    st = TrialState(params)
    st.doses = dose_records
    st.enrolled_total = sum(r.n for r in dose_records)
    st.status = STATUS_MAX_N
    return st


def test_final_selection_single_candidate():
    st = _stopped_state([DoseRecord(a=8, b=1, c=3, d=0)])
    assert st.final_selection() == 1


def test_final_selection_all_eliminated():
    st = _stopped_state([
        DoseRecord(b=3, eliminated_safety=True),
        DoseRecord(eliminated_safety=True),
    ])
    assert st.final_selection() is None


def test_final_selection_tie_goes_to_lower_dose():
    st = _stopped_state([
        DoseRecord(a=1, c=2),
        DoseRecord(a=1, c=2),
    ])
    assert st.final_selection() == 1


def test_final_selection_needs_three_patients():
    st = _stopped_state([DoseRecord(a=2), DoseRecord(a=6, c=0)])
    assert st.final_selection() == 2


def test_final_selection_requires_stopped_trial():
    st = TrialState(P18)
    with pytest.raises(TrialError):
        st.final_selection()


# ---------------------------------------------------------------------------
# reduction to the fixed-cohort design
# ---------------------------------------------------------------------------

def _drive(params, rng, max_cohorts=40):
    st = TrialState(params)
    decisions = []
    for _ in range(max_cohorts):
        if st.status != STATUS_ACTIVE:
            break
        size = st.pending_size
        tox = rng.random(size) < 0.25
        eff = rng.random(size) < 0.45
        a = int(np.count_nonzero(eff & ~tox))
        b = int(np.count_nonzero(eff & tox))
        d = int(np.count_nonzero(~eff & tox))
        st.record_cohort(st.pending_dose, cohort(a=a, b=b, c=size - a - b - d, d=d))
        decision = st.next_decision()
        decisions.append((decision.action, decision.next_dose, decision.next_cohort_size))
    return st, decisions


def test_theta_near_one_reduces_to_fixed_design():
    base = DesignParams(num_doses=5, max_n=36, adaptive=False)
    near_one = DesignParams(num_doses=5, max_n=36, theta=1 - 1e-9)
    for seed in range(25):
        st_a, dec_a = _drive(near_one, np.random.default_rng(seed))
        st_b, dec_b = _drive(base, np.random.default_rng(seed))
        assert dec_a == dec_b
        assert st_a.status == st_b.status
        assert [r.n for r in st_a.doses] == [r.n for r in st_b.doses]


# ---------------------------------------------------------------------------
# invariants over random trajectories
# ---------------------------------------------------------------------------

def test_random_trajectories_respect_invariants():
    params = DesignParams(num_doses=5, max_n=36)
    for seed in range(60):
        rng = np.random.default_rng(1000 + seed)
        p_tox = rng.uniform(0.05, 0.7)
        p_eff = rng.uniform(0.05, 0.7)
        st = TrialState(params)
        previous_dose = params.start_dose
        while st.status == STATUS_ACTIVE:
            dose, size = st.pending_dose, st.pending_size
            # never skip a level upward; downward may only pass over
            # doses that are no longer admissible
            assert dose <= previous_dose + 1
            for skipped in range(dose + 1, previous_dose):
                assert not st.dose(skipped).admissible
            assert st.dose(dose).admissible  # never dose an eliminated level
            tox = rng.random(size) < p_tox
            eff = rng.random(size) < p_eff
            a = int(np.count_nonzero(eff & ~tox))
            b = int(np.count_nonzero(eff & tox))
            d = int(np.count_nonzero(~eff & tox))
            st.record_cohort(dose, cohort(a=a, b=b, c=size - a - b - d, d=d))
            previous_dose = dose
            st.next_decision()
            assert st.enrolled_total <= params.max_n


def test_fallback_passes_over_eliminated_doses_only():
    # current dose mandates de-escalation, the level below is futility
    # eliminated: the trial falls back to the nearest admissible dose.
    params = DesignParams(num_doses=3, max_n=36, stop_rule_enabled=False)
    st = TrialState(params)
    st.doses[0] = DoseRecord(a=1, c=2)   # dose 1: fine
    st.doses[1] = DoseRecord(c=9)        # dose 2: 9 patients, no responses
    st.doses[2] = DoseRecord(b=2, d=1)   # dose 3: 3/3 toxicities
    st.enrolled_total = 15
    st.current_dose = 3
    decision = st.next_decision()
    assert st.dose(2).eliminated_futility
    assert st.dose(3).eliminated_safety
    assert decision.action == "deescalate"
    assert decision.next_dose == 1


# ---------------------------------------------------------------------------
# audit, replay, serialization
# ---------------------------------------------------------------------------

def _example_conduct(params=P18, seed=3):
    rng = np.random.default_rng(seed)
    st = TrialState(params)
    while st.status == STATUS_ACTIVE and st.enrolled_total < params.max_n:
        size = st.pending_size
        tox = rng.random(size) < 0.3
        eff = rng.random(size) < 0.4
        a = int(np.count_nonzero(eff & ~tox))
        b = int(np.count_nonzero(eff & tox))
        d = int(np.count_nonzero(~eff & tox))
        st.record_cohort(st.pending_dose, cohort(a=a, b=b, c=size - a - b - d, d=d))
        st.next_decision()
    return st


def test_audit_replay_reproduces_decisions_bit_for_bit():
    st = _example_conduct()
    cohorts = [
        (e["dose"], cohort(a=e["a"], b=e["b"], c=e["c"], d=e["d"]))
        for e in st.audit
        if e["event"] == "cohort"
    ]
    replayed = TrialState.replay(st.params, cohorts)
    original = [e["decision"] for e in st.audit if e["event"] == "decision"]
    again = [e["decision"] for e in replayed.audit if e["event"] == "decision"]
    assert original == again
    assert replayed.status == st.status


def test_json_round_trip():
    st = _example_conduct()
    doc = st.to_json()
    again = TrialState.from_json(doc)
    assert again.to_dict() == st.to_dict()


def test_from_dict_rejects_bad_documents():
    st = _example_conduct()
    good = st.to_dict()
    with pytest.raises(ValueError):
        TrialState.from_dict({**good, "schema_version": 99})
    bad = dict(good)
    del bad["doses"]
    with pytest.raises(ValueError):
        TrialState.from_dict(bad)
    with pytest.raises(ValueError):
        TrialState.from_dict({**good, "enrolled_total": good["enrolled_total"] + 1})
    with pytest.raises(ValueError):
        TrialState.from_json("{not json")


def test_elimination_flags_survive_round_trip():
    st = TrialState(P18)
    st.record_cohort(1, cohort(b=3))
    st.next_decision()
    again = TrialState.from_json(st.to_json())
    assert again.dose(1).eliminated_safety
    assert again.status == STATUS_NO_ADMISSIBLE


# ---------------------------------------------------------------------------
# recommendations (shared by the CLI and the service)
# ---------------------------------------------------------------------------

def test_recommendation_on_fresh_trial():
    st = TrialState(P18)
    rec = st.current_recommendation()
    assert rec == {
        "trial_stopped": False,
        "status": STATUS_ACTIVE,
        "next_dose": 1,
        "next_cohort_size": 3,
        "decision": None,
    }


def test_recommendation_computes_pending_decision_without_mutation():
    st = TrialState(P18)
    st.record_cohort(1, cohort(a=1, c=2))
    before = json.dumps(st.to_dict(), sort_keys=True)
    rec = st.current_recommendation()
    assert rec["next_dose"] == 2
    assert rec["next_cohort_size"] == 3
    assert rec["decision"]["action"] == "escalate"
    assert json.dumps(st.to_dict(), sort_keys=True) == before  # untouched


def test_recommendation_on_stopped_trial():
    st = TrialState(P18)
    st.record_cohort(1, cohort(b=3))
    st.next_decision()
    rec = st.current_recommendation()
    assert rec["trial_stopped"] is True
    assert rec["status"] == STATUS_NO_ADMISSIBLE
    assert rec["final_selection"] is None


def test_decision_object_shape():
    d = Decision(action="stay", next_dose=2, next_cohort_size=6, rationale={"x": 1})
    assert d.to_dict()["next_cohort_size"] == 6
