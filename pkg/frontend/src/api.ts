/**
 * Typed client for the decision service. Mutations are serialized: a
 * second submission while one is in flight is rejected client-side.
 */

import type {
  CohortForm,
  DesignPayload,
  RecommendationPayload,
  TrialStatePayload,
  WhatIfPayload,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    public status: number,
    public code: string,
    message: string,
  ) {
    super(message);
  }
}

async function parseError(response: Response): Promise<ApiError> {
  try {
    const body = await response.json();
    return new ApiError(response.status, body.error.code, body.error.message);
  } catch {
    return new ApiError(response.status, "UNKNOWN", response.statusText);
  }
}

export class ServiceClient {
  private mutationInFlight = false;

  constructor(private baseUrl: string = "") {}

  private async get<T>(path: string): Promise<T> {
    const response = await fetch(this.baseUrl + path);
    if (!response.ok) throw await parseError(response);
    return (await response.json()) as T;
  }

  private async post<T>(path: string, body: unknown): Promise<T> {
    const response = await fetch(this.baseUrl + path, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
    if (!response.ok) throw await parseError(response);
    return (await response.json()) as T;
  }

  design(): Promise<DesignPayload> {
    return this.get("/design");
  }

  state(): Promise<TrialStatePayload> {
    return this.get("/state");
  }

  decision(): Promise<RecommendationPayload> {
    return this.get("/decision");
  }

  audit(): Promise<{ schema_version: number; audit: TrialStatePayload["audit"] }> {
    return this.get("/audit");
  }

  tables(): Promise<unknown> {
    return this.get("/tables");
  }

  /** Commit one cohort's outcomes. Only one mutation may be in flight. */
  async submitCohort(form: CohortForm): Promise<unknown> {
    if (this.mutationInFlight) {
      throw new ApiError(0, "MUTATION_IN_FLIGHT", "a submission is already in progress");
    }
    this.mutationInFlight = true;
    try {
      return await this.post("/cohort", form);
    } finally {
      this.mutationInFlight = false;
    }
  }

  /** Preview a hypothetical cohort; the service never mutates state. */
  whatIf(form: CohortForm): Promise<WhatIfPayload> {
    return this.post("/whatif", form);
  }

  async reset(): Promise<unknown> {
    if (this.mutationInFlight) {
      throw new ApiError(0, "MUTATION_IN_FLIGHT", "a submission is already in progress");
    }
    this.mutationInFlight = true;
    try {
      return await this.post("/reset", {});
    } finally {
      this.mutationInFlight = false;
    }
  }
}
