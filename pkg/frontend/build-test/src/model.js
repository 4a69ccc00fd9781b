/**
 * Pure view-model: turns service payloads into the structures the DOM
 * layer renders, and validates the cohort form before any request is
 * sent. Every number displayed originates in a service response.
 */
export function summarizeDesign(design) {
    const p = design.params;
    return {
        numDoses: p.num_doses,
        maxN: p.max_n,
        baseCohort: p.base_cohort,
        expandedCohort: p.expanded_cohort,
        toxLimit: p.phi_t,
        effFloor: p.psi_e,
        expansionThreshold: p.theta,
        stopRule: p.stop_rule_enabled
            ? `stop once ${p.per_dose_stop_n} treated at the chosen dose`
            : "run to the maximum sample size",
        adaptive: p.adaptive,
    };
}
export function describeRationale(decision) {
    if (!decision)
        return [];
    const lines = [];
    const r = decision.rationale;
    if (r.boundary) {
        const b = r.boundary;
        lines.push(`toxicity ${b.tox}/${b.n}: escalate if ≤ ${b.escalate_if_tox_le}, ` +
            `de-escalate if ≥ ${b.deescalate_if_tox_ge} (${b.region})`);
    }
    if (r.candidates) {
        for (const [dose, dp] of Object.entries(r.candidates)) {
            lines.push(`dose ${dose}: desirability probability ${dp.toFixed(4)}`);
        }
    }
    if (r.expansion) {
        const e = r.expansion;
        let line = e.qualifies
            ? `expansion condition met (dp ${e.dp.toFixed(4)} > ${e.theta})`
            : `expansion condition not met (dp ${e.dp.toFixed(4)} ≤ ${e.theta})`;
        if (e.capped_by_max_n)
            line += ", capped by the sample-size budget";
        if (e.capped_by_stop_rule)
            line += ", capped by the per-dose stopping rule";
        lines.push(line);
    }
    if (r.stop_reason)
        lines.push(`stop reason: ${r.stop_reason}`);
    return lines;
}
export function buildCard(recommendation) {
    const rationale = describeRationale(recommendation.decision);
    if (recommendation.trial_stopped) {
        return {
            kind: "stopped",
            status: recommendation.status,
            finalSelection: recommendation.final_selection ?? null,
            rationale,
        };
    }
    return {
        kind: "pending",
        nextDose: recommendation.next_dose,
        cohortSize: recommendation.next_cohort_size,
        action: recommendation.decision ? recommendation.decision.action : null,
        rationale,
    };
}
export function buildTally(recommendation) {
    const next = recommendation.trial_stopped ? null : recommendation.next_dose;
    return recommendation.doses.map((d) => {
        const badges = [];
        if (d.eliminated_safety)
            badges.push("eliminated: safety");
        if (d.eliminated_futility)
            badges.push("eliminated: futility");
        return {
            dose: d.dose,
            n: d.n,
            tox: d.tox,
            eff: d.eff,
            dp: d.dp,
            badges,
            isNext: d.dose === next,
        };
    });
}
export function buildAudit(entries) {
    return entries.map((entry) => {
        if (entry.event === "cohort") {
            const n = entry.a + entry.b + entry.c + entry.d;
            const tox = entry.b + entry.d;
            const eff = entry.a + entry.b;
            return {
                seq: entry.seq,
                ts: entry.ts,
                text: `cohort at dose ${entry.dose}: ${n} patients, ${tox} toxicity, ${eff} efficacy`,
            };
        }
        const d = entry.decision;
        const text = d.action === "stop"
            ? `decision: stop (${d.rationale.stop_reason ?? "stopped"})`
            : `decision: ${d.action} → dose ${d.next_dose}, next cohort of ${d.next_cohort_size}`;
        return { seq: entry.seq, ts: entry.ts, text };
    });
}
export function buildView(design, state, recommendation) {
    return {
        design: summarizeDesign(design),
        tally: buildTally(recommendation),
        card: buildCard(recommendation),
        audit: buildAudit(state.audit),
        enrolled: state.enrolled_total,
        status: state.status,
        stopped: recommendation.trial_stopped,
        promisedDose: state.pending_dose,
        promisedSize: state.pending_size,
    };
}
/**
 * Cohort submissions recorded in an exported trial-state document, in
 * order. Replaying them through the service reconstructs the trial:
 * decisions are deterministic, so they are recomputed identically.
 */
export function cohortEventsOf(state) {
    return state.audit
        .filter((entry) => entry.event === "cohort")
        .map((entry) => ({ dose: entry.dose, a: entry.a, b: entry.b, c: entry.c, d: entry.d }));
}
/**
 * Client-side form validation; a non-empty result means no request is
 * sent and the messages are shown inline.
 */
export function validateCohortForm(form, promisedDose, promisedSize) {
    const errors = [];
    const counts = [
        ["efficacy without toxicity", form.a],
        ["efficacy with toxicity", form.b],
        ["neither", form.c],
        ["toxicity without efficacy", form.d],
    ];
    for (const [label, value] of counts) {
        if (!Number.isInteger(value) || value < 0) {
            errors.push(`count "${label}" must be a nonnegative whole number`);
        }
    }
    if (errors.length > 0)
        return errors;
    const total = form.a + form.b + form.c + form.d;
    if (promisedSize !== null && total !== promisedSize) {
        errors.push(`outcome counts sum to ${total}, but the promised cohort size is ${promisedSize}`);
    }
    if (promisedDose !== null && form.dose !== promisedDose) {
        errors.push(`dose ${form.dose} does not match the assigned dose ${promisedDose}`);
    }
    return errors;
}
