/** Pure view-model behavior: validation, card/tally/audit construction. */
import assert from "node:assert/strict";
import { test } from "node:test";
import { buildAudit, buildCard, buildTally, validateCohortForm, } from "../src/model.js";
const pendingRecommendation = {
    schema_version: 1,
    trial_stopped: false,
    status: "active",
    next_dose: 2,
    next_cohort_size: 3,
    decision: {
        action: "escalate",
        next_dose: 2,
        next_cohort_size: 3,
        rationale: {
            boundary: { n: 3, tox: 0, escalate_if_tox_le: 0, deescalate_if_tox_ge: 2, region: "escalate" },
            candidates: { "1": 0.2691, "2": 0.295 },
            expansion: {
                dose: 2, qualifies: false, dp: 0.295, theta: 0.2,
                capped_by_max_n: false, capped_by_stop_rule: false,
            },
        },
    },
    doses: [
        { dose: 1, n: 3, tox: 0, eff: 1, dp: 0.2691, eliminated_safety: false, eliminated_futility: false },
        { dose: 2, n: 0, tox: 0, eff: 0, dp: 0.295, eliminated_safety: false, eliminated_futility: false },
    ],
};
test("pending card carries the recommendation verbatim", () => {
    const card = buildCard(pendingRecommendation);
    assert.equal(card.kind, "pending");
    if (card.kind === "pending") {
        assert.equal(card.nextDose, 2);
        assert.equal(card.cohortSize, 3);
        assert.equal(card.action, "escalate");
        assert.ok(card.rationale.some((line) => line.includes("0.2950")));
    }
});
test("stopped card reports status and final selection", () => {
    const card = buildCard({
        ...pendingRecommendation,
        trial_stopped: true,
        status: "stopped_no_admissible",
        final_selection: null,
        decision: null,
    });
    assert.equal(card.kind, "stopped");
    if (card.kind === "stopped") {
        assert.equal(card.status, "stopped_no_admissible");
        assert.equal(card.finalSelection, null);
    }
});
test("tally marks the next dose and elimination badges", () => {
    const rows = buildTally({
        ...pendingRecommendation,
        doses: [
            ...pendingRecommendation.doses,
            { dose: 3, n: 3, tox: 3, eff: 0, dp: 0.01, eliminated_safety: true, eliminated_futility: false },
        ],
    });
    assert.deepEqual(rows.map((r) => r.isNext), [false, true, false]);
    assert.deepEqual(rows[2].badges, ["eliminated: safety"]);
});
test("audit rows summarize cohorts and decisions", () => {
    const entries = [
        { seq: 1, ts: "t1", event: "cohort", dose: 1, a: 1, b: 0, c: 2, d: 0 },
        {
            seq: 2, ts: "t2", event: "decision",
            decision: { action: "escalate", next_dose: 2, next_cohort_size: 3, rationale: {} },
        },
    ];
    const rows = buildAudit(entries);
    assert.match(rows[0].text, /cohort at dose 1: 3 patients, 0 toxicity, 1 efficacy/);
    assert.match(rows[1].text, /escalate .* dose 2, next cohort of 3/);
});
test("form validation rejects bad counts before any request", () => {
    assert.deepEqual(validateCohortForm({ dose: 1, a: 1, b: 0, c: 2, d: 0 }, 1, 3), []);
    assert.ok(validateCohortForm({ dose: 1, a: 1, b: 0, c: 1, d: 0 }, 1, 3)[0].includes("sum to 2"));
    assert.ok(validateCohortForm({ dose: 2, a: 1, b: 0, c: 2, d: 0 }, 1, 3)[0].includes("assigned dose"));
    assert.ok(validateCohortForm({ dose: 1, a: -1, b: 0, c: 4, d: 0 }, 1, 3).length > 0);
    assert.ok(validateCohortForm({ dose: 1, a: 0.5, b: 0, c: 2.5, d: 0 }, 1, 3).length > 0);
});
