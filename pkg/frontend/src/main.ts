/**
 * DOM wiring. All trial logic lives server-side; this file only renders
 * the view-model and forwards form submissions.
 */

import { ApiError, ServiceClient } from "./api.js";
import {
  buildView,
  cohortEventsOf,
  validateCohortForm,
  describeRationale,
  type UiTrialView,
} from "./model.js";
import type { CohortForm, TrialStatePayload } from "./types.js";

const client = new ServiceClient("");

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function readForm(): CohortForm {
  const num = (id: string) => Number((el<HTMLInputElement>(id)).value || "0");
  return {
    dose: num("form-dose"),
    a: num("form-a"),
    b: num("form-b"),
    c: num("form-c"),
    d: num("form-d"),
  };
}

function renderErrors(messages: string[]): void {
  const box = el<HTMLDivElement>("form-errors");
  box.textContent = messages.join("; ");
  box.hidden = messages.length === 0;
}

function renderView(view: UiTrialView): void {
  el<HTMLDivElement>("design-summary").textContent =
    `${view.design.numDoses} dose levels, up to ${view.design.maxN} patients; ` +
    `cohorts of ${view.design.baseCohort} (expanded: ${view.design.expandedCohort}); ` +
    `toxicity limit ${view.design.toxLimit}, efficacy floor ${view.design.effFloor}; ` +
    `expansion threshold ${view.design.expansionThreshold}; ${view.design.stopRule}`;

  const tbody = el<HTMLTableSectionElement>("tally-body");
  tbody.replaceChildren(
    ...view.tally.map((row) => {
      const tr = document.createElement("tr");
      if (row.isNext) tr.classList.add("next-dose");
      const badge = row.badges.length > 0 ? ` ⚠ ${row.badges.join(", ")}` : "";
      for (const cell of [
        `${row.dose}`,
        `${row.n}`,
        `${row.tox}`,
        `${row.eff}`,
        row.dp.toFixed(4) + badge,
      ]) {
        const td = document.createElement("td");
        td.textContent = cell;
        tr.appendChild(td);
      }
      return tr;
    }),
  );

  const card = el<HTMLDivElement>("recommendation");
  const lines: string[] = [];
  if (view.card.kind === "stopped") {
    lines.push(`Trial stopped (${view.card.status}).`);
    lines.push(
      view.card.finalSelection === null
        ? "Final selection: none (no admissible dose)."
        : `Final selection: dose ${view.card.finalSelection}.`,
    );
  } else {
    lines.push(`Next cohort: dose ${view.card.nextDose}, ${view.card.cohortSize} patients.`);
    if (view.card.action) lines.push(`Action: ${view.card.action}.`);
  }
  card.replaceChildren(
    ...lines.map((text) => {
      const p = document.createElement("p");
      p.className = "headline";
      p.textContent = text;
      return p;
    }),
    ...view.card.rationale.map((text) => {
      const p = document.createElement("p");
      p.className = "rationale";
      p.textContent = text;
      return p;
    }),
  );

  el<HTMLDivElement>("enrolled").textContent =
    `${view.enrolled} of ${view.design.maxN} patients enrolled`;

  const audit = el<HTMLOListElement>("audit-list");
  audit.replaceChildren(
    ...view.audit.map((row) => {
      const li = document.createElement("li");
      li.textContent = `#${row.seq} ${row.text}`;
      li.title = row.ts;
      return li;
    }),
  );

  const form = el<HTMLFormElement>("cohort-form");
  const disabled = view.stopped;
  for (const input of Array.from(form.querySelectorAll("input,button"))) {
    (input as HTMLInputElement | HTMLButtonElement).disabled = disabled;
  }
  el<HTMLDivElement>("stop-banner").hidden = !disabled;
  if (disabled) {
    el<HTMLDivElement>("stop-banner").textContent =
      `Trial stopped (${view.status}); no further cohorts can be recorded.`;
  }
  if (!disabled && view.promisedDose !== null && view.promisedSize !== null) {
    el<HTMLInputElement>("form-dose").value = String(view.promisedDose);
    el<HTMLSpanElement>("promised-size").textContent = String(view.promisedSize);
  }
}

async function refresh(): Promise<UiTrialView> {
  const [design, state, decision] = await Promise.all([
    client.design(),
    client.state(),
    client.decision(),
  ]);
  const view = buildView(design, state, decision);
  renderView(view);
  return view;
}

async function onSubmit(event: Event): Promise<void> {
  event.preventDefault();
  renderErrors([]);
  const form = readForm();
  const state = await client.state();
  const problems = validateCohortForm(form, state.pending_dose, state.pending_size);
  if (problems.length > 0) {
    renderErrors(problems);
    return;
  }
  try {
    await client.submitCohort(form);
    for (const id of ["form-a", "form-b", "form-c", "form-d"]) {
      el<HTMLInputElement>(id).value = "0";
    }
    await refresh();
  } catch (error) {
    if (error instanceof ApiError) {
      renderErrors([`${error.code}: ${error.message}`]);
    } else {
      renderErrors([String(error)]);
    }
  }
}

async function onWhatIf(): Promise<void> {
  renderErrors([]);
  const form = readForm();
  const preview = el<HTMLDivElement>("whatif-preview");
  try {
    const reply = await client.whatIf(form);
    const lines: string[] = [];
    if (!reply.decision) {
      lines.push("No decision: the trial is stopped.");
    } else if (reply.decision.action === "stop") {
      lines.push("This outcome would stop the trial.");
    } else {
      lines.push(
        `Would ${reply.decision.action} to dose ${reply.decision.next_dose} ` +
          `with a cohort of ${reply.decision.next_cohort_size}.`,
      );
    }
    lines.push(...describeRationale(reply.decision));
    preview.replaceChildren(
      ...lines.map((text) => {
        const p = document.createElement("p");
        p.textContent = text;
        return p;
      }),
    );
    preview.hidden = false;
  } catch (error) {
    if (error instanceof ApiError) {
      renderErrors([`${error.code}: ${error.message}`]);
    } else {
      renderErrors([String(error)]);
    }
  }
}

async function onExport(): Promise<void> {
  const state = await client.state();
  const blob = new Blob([JSON.stringify(state, null, 2)], { type: "application/json" });
  const link = document.createElement("a");
  link.href = URL.createObjectURL(blob);
  link.download = "trial-state.json";
  link.click();
  URL.revokeObjectURL(link.href);
}

async function onReset(): Promise<void> {
  if (!window.confirm("Discard all recorded cohorts and start a fresh trial?")) return;
  await client.reset();
  el<HTMLDivElement>("whatif-preview").hidden = true;
  await refresh();
}

async function onImport(event: Event): Promise<void> {
  const input = event.target as HTMLInputElement;
  const file = input.files?.[0];
  input.value = "";
  if (!file) return;
  renderErrors([]);
  try {
    const doc = JSON.parse(await file.text()) as TrialStatePayload;
    const cohorts = cohortEventsOf(doc);
    if (!window.confirm(
      `Replace the current trial by replaying ${cohorts.length} recorded cohort(s)?`,
    )) return;
    await client.reset();
    for (const form of cohorts) {
      await client.submitCohort(form);
    }
    await refresh();
  } catch (error) {
    if (error instanceof ApiError) {
      renderErrors([`import failed, ${error.code}: ${error.message}`]);
    } else {
      renderErrors([`import failed: ${String(error)}`]);
    }
  }
}

function wire(): void {
  el<HTMLFormElement>("cohort-form").addEventListener("submit", (e) => void onSubmit(e));
  el<HTMLButtonElement>("whatif-button").addEventListener("click", () => void onWhatIf());
  el<HTMLButtonElement>("whatif-close").addEventListener("click", () => {
    el<HTMLDivElement>("whatif-preview").hidden = true;
  });
  el<HTMLButtonElement>("export-button").addEventListener("click", () => void onExport());
  el<HTMLInputElement>("import-input").addEventListener("change", (e) => void onImport(e));
  el<HTMLButtonElement>("reset-button").addEventListener("click", () => void onReset());
  void refresh();
}

document.addEventListener("DOMContentLoaded", wire);
