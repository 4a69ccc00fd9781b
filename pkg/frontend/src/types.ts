/**
 * Payload shapes of the decision service. The client renders these
 * verbatim; it never derives statistics of its own.
 */

export interface UtilityWeightsPayload {
  eff_no_tox: number;
  eff_tox: number;
  no_eff_no_tox: number;
  no_eff_tox: number;
}

export interface DesignParamsPayload {
  num_doses: number;
  start_dose: number;
  phi_t: number;
  psi_e: number;
  weights: UtilityWeightsPayload;
  safety_cutoff: number;
  futility_cutoff: number;
  theta: number;
  base_cohort: number;
  expanded_cohort: number;
  max_n: number;
  per_dose_stop_n: number;
  stop_rule_enabled: boolean;
  tox_window_days: number;
  eff_window_days: number;
  accrual_rate_per_month: number;
  phi1_factor: number;
  phi2_factor: number;
  adaptive: boolean;
}

export interface DesignPayload {
  schema_version: number;
  params: DesignParamsPayload;
}

export interface DoseSummary {
  dose: number;
  n: number;
  tox: number;
  eff: number;
  dp: number;
  eliminated_safety: boolean;
  eliminated_futility: boolean;
}

export interface DecisionDict {
  action: "escalate" | "stay" | "deescalate" | "stop";
  next_dose: number | null;
  next_cohort_size: number | null;
  rationale: {
    boundary?: {
      n: number;
      tox: number;
      escalate_if_tox_le: number;
      deescalate_if_tox_ge: number;
      region: string;
    };
    candidates?: Record<string, number>;
    expansion?: {
      dose: number;
      qualifies: boolean;
      dp: number;
      theta: number;
      capped_by_max_n: boolean;
      capped_by_stop_rule: boolean;
    };
    eliminations?: Array<{ dose: number; safety: boolean; futility: boolean }>;
    stop_reason?: string;
  };
}

export interface RecommendationPayload {
  schema_version: number;
  trial_stopped: boolean;
  status: string;
  next_dose?: number | null;
  next_cohort_size?: number | null;
  final_selection?: number | null;
  decision: DecisionDict | null;
  doses: DoseSummary[];
}

export interface StateDosePayload {
  a: number;
  b: number;
  c: number;
  d: number;
  eliminated_safety: boolean;
  eliminated_futility: boolean;
}

export type AuditEntry =
  | { seq: number; ts: string; event: "cohort"; dose: number; a: number; b: number; c: number; d: number }
  | { seq: number; ts: string; event: "decision"; decision: DecisionDict };

export interface TrialStatePayload {
  schema_version: number;
  params: DesignParamsPayload;
  doses: StateDosePayload[];
  current_dose: number;
  enrolled_total: number;
  status: string;
  pending_dose: number | null;
  pending_size: number | null;
  needs_decision: boolean;
  audit: AuditEntry[];
}

export interface WhatIfPayload {
  schema_version: number;
  trial_stopped: boolean;
  decision: DecisionDict | null;
}

export interface CohortForm {
  dose: number;
  a: number;
  b: number;
  c: number;
  d: number;
}

export interface ServiceErrorBody {
  error: { code: string; message: string };
}
