/**
 * Typed client for the decision service. Mutations are serialized: a
 * second submission while one is in flight is rejected client-side.
 */
export class ApiError extends Error {
    status;
    code;
    constructor(status, code, message) {
        super(message);
        this.status = status;
        this.code = code;
    }
}
async function parseError(response) {
    try {
        const body = await response.json();
        return new ApiError(response.status, body.error.code, body.error.message);
    }
    catch {
        return new ApiError(response.status, "UNKNOWN", response.statusText);
    }
}
export class ServiceClient {
    baseUrl;
    mutationInFlight = false;
    constructor(baseUrl = "") {
        this.baseUrl = baseUrl;
    }
    async get(path) {
        const response = await fetch(this.baseUrl + path);
        if (!response.ok)
            throw await parseError(response);
        return (await response.json());
    }
    async post(path, body) {
        const response = await fetch(this.baseUrl + path, {
            method: "POST",
            headers: { "Content-Type": "application/json" },
            body: JSON.stringify(body),
        });
        if (!response.ok)
            throw await parseError(response);
        return (await response.json());
    }
    design() {
        return this.get("/design");
    }
    state() {
        return this.get("/state");
    }
    decision() {
        return this.get("/decision");
    }
    audit() {
        return this.get("/audit");
    }
    tables() {
        return this.get("/tables");
    }
    /** Commit one cohort's outcomes. Only one mutation may be in flight. */
    async submitCohort(form) {
        if (this.mutationInFlight) {
            throw new ApiError(0, "MUTATION_IN_FLIGHT", "a submission is already in progress");
        }
        this.mutationInFlight = true;
        try {
            return await this.post("/cohort", form);
        }
        finally {
            this.mutationInFlight = false;
        }
    }
    /** Preview a hypothetical cohort; the service never mutates state. */
    whatIf(form) {
        return this.post("/whatif", form);
    }
    async reset() {
        if (this.mutationInFlight) {
            throw new ApiError(0, "MUTATION_IN_FLIGHT", "a submission is already in progress");
        }
        this.mutationInFlight = true;
        try {
            return await this.post("/reset", {});
        }
        finally {
            this.mutationInFlight = false;
        }
    }
}
