"""Local JSON-over-HTTP decision service for live trial conduct.

Binds localhost by default and has NO authentication: it is a
single-operator tool meant to sit next to the statistician's browser,
never on a shared network.

Mutations (`POST /cohort`, `POST /reset`) are validated against a
scratch copy, appended to a write-ahead log, and only then applied, so
a crash can always be recovered by replaying the log.  All mutations
are serialized; reads snapshot the current state.  What-if previews
never touch committed state.
"""

from __future__ import annotations

import json
import os
import threading
from datetime import datetime, timezone
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

from .engine import TrialError, TrialState
from .quasibeta import OutcomeCounts2x2
from .rules import DesignParams, params_to_dict
from .tables import expansion_table, rds_table, safety_table

SCHEMA_VERSION = 1

# Engine violations that mean "this submission is out of order with the
# trial's progress" map to HTTP 409; everything else client-shaped is 400.
CONFLICT_CODES = {
    "DOSE_MISMATCH",
    "COHORT_SIZE_MISMATCH",
    "TRIAL_STOPPED",
    "ENROLLMENT_OVERFLOW",
}


class ServiceError(Exception):
    def __init__(self, status: int, code: str, message: str):
        super().__init__(message)
        self.status = status
        self.code = code


def _parse_cohort_body(body: dict) -> tuple[int, OutcomeCounts2x2]:
    if not isinstance(body, dict):
        raise ServiceError(400, "SCHEMA_INVALID", "body must be a JSON object")
    missing = {"dose", "a", "b", "c", "d"} - set(body)
    if missing:
        raise ServiceError(400, "SCHEMA_INVALID", f"missing fields: {sorted(missing)}")
    try:
        dose = int(body["dose"])
        counts = OutcomeCounts2x2(
            a=int(body["a"]), b=int(body["b"]), c=int(body["c"]), d=int(body["d"])
        )
    except (TypeError, ValueError) as exc:
        raise ServiceError(400, "SCHEMA_INVALID", str(exc)) from exc
    return dose, counts


class ConductService:
    """Holds the trial state, the write-ahead log, and the table cache."""

    def __init__(self, params: DesignParams, state_dir: str | None = None):
        self.params = params
        self.lock = threading.Lock()
        self.state = TrialState(params)
        self.wal_path: Path | None = None
        self._wal_seq = 0
        if state_dir is not None:
            directory = Path(state_dir)
            directory.mkdir(parents=True, exist_ok=True)
            self.wal_path = directory / "wal.jsonl"
            self._recover()

    # -- write-ahead log ---------------------------------------------------

    def _recover(self) -> None:
        if self.wal_path is None or not self.wal_path.exists():
            return
        with open(self.wal_path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                entry = json.loads(line)
                result = self._apply(entry["op"], entry.get("body") or {})
                self.state = result["next_state"]
                self._wal_seq += 1

    def _append_wal(self, op: str, body: dict) -> None:
        if self.wal_path is None:
            return
        self._wal_seq += 1
        entry = {
            "seq": self._wal_seq,
            "ts": datetime.now(timezone.utc).isoformat(),
            "op": op,
            "body": body,
        }
        with open(self.wal_path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(entry) + "\n")
            fh.flush()
            os.fsync(fh.fileno())

    def _apply(self, op: str, body: dict) -> dict:
        """Run a mutation against a scratch copy; committed only by _mutate.

        The copy-first discipline means the write-ahead log never records a
        mutation the engine would reject, so replay cannot fail.
        """
        if op == "cohort":
            dose, counts = _parse_cohort_body(body)
            probe = self.state.copy()
            try:
                probe.record_cohort(dose, counts)
                decision = probe.next_decision()
            except TrialError as exc:
                status = 409 if exc.code in CONFLICT_CODES else 400
                raise ServiceError(status, exc.code, str(exc)) from exc
            except ValueError as exc:
                raise ServiceError(400, "SCHEMA_INVALID", str(exc)) from exc
            return {"next_state": probe, "decision": decision.to_dict()}
        if op == "reset":
            return {"next_state": TrialState(self.params)}
        raise ServiceError(400, "UNKNOWN_OP", f"unknown operation {op!r}")

    def _mutate(self, op: str, body: dict) -> dict:
        with self.lock:
            result = self._apply(op, body)
            self._append_wal(op, body)
            self.state = result.pop("next_state")
            result["state"] = self.state.to_dict()
            return result

    # -- operations ----------------------------------------------------------

    def design(self) -> dict:
        return {"schema_version": SCHEMA_VERSION, "params": params_to_dict(self.params)}

    def tables(self) -> dict:
        cap = min(self.params.per_dose_stop_n, self.params.max_n)
        rds_grid = list(range(0, cap + 1, self.params.base_cohort))
        return {
            "schema_version": SCHEMA_VERSION,
            "safety": [vars(r) for r in safety_table(self.params)],
            "rds": [vars(r) for r in rds_table(self.params, n_grid=rds_grid)],
            "expansion": [vars(r) for r in expansion_table(self.params)],
        }

    def get_state(self) -> dict:
        with self.lock:
            return self.state.to_dict()

    def decision(self) -> dict:
        with self.lock:
            return {
                "schema_version": SCHEMA_VERSION,
                **self.state.current_recommendation(),
                "doses": self.state.dose_summaries(),
            }

    def audit(self) -> dict:
        with self.lock:
            return {"schema_version": SCHEMA_VERSION, "audit": list(self.state.audit)}

    def cohort(self, body: dict) -> dict:
        result = self._mutate("cohort", body)
        return {
            "schema_version": SCHEMA_VERSION,
            "decision": result["decision"],
            "state": result["state"],
        }

    def whatif(self, body: dict) -> dict:
        dose, counts = _parse_cohort_body(body)
        with self.lock:
            preview = self.state.copy()
        if preview.status != "active":
            return {
                "schema_version": SCHEMA_VERSION,
                "trial_stopped": True,
                "decision": None,
                "recommendation": preview.current_recommendation(),
            }
        try:
            preview.record_cohort(dose, counts)
            decision = preview.next_decision()
        except TrialError as exc:
            status = 409 if exc.code in CONFLICT_CODES else 400
            raise ServiceError(status, exc.code, str(exc)) from exc
        return {
            "schema_version": SCHEMA_VERSION,
            "trial_stopped": preview.status != "active",
            "decision": decision.to_dict(),
            "recommendation": preview.current_recommendation(),
        }

    def reset(self) -> dict:
        result = self._mutate("reset", {})
        return {"schema_version": SCHEMA_VERSION, "state": result["state"]}


class _Handler(BaseHTTPRequestHandler):
    service: ConductService = None  # injected by make_server
    static_dir: Path | None = None

    def log_message(self, fmt, *args):  # quiet by default
        pass

    def _send_json(self, status: int, payload: dict) -> None:
        data = json.dumps(payload).encode()
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def _send_error_json(self, status: int, code: str, message: str) -> None:
        self._send_json(status, {"error": {"code": code, "message": message}})

    def _read_body(self) -> dict:
        length = int(self.headers.get("Content-Length") or 0)
        raw = self.rfile.read(length) if length else b""
        if not raw:
            return {}
        try:
            return json.loads(raw)
        except json.JSONDecodeError as exc:
            raise ServiceError(400, "BAD_JSON", f"request body is not valid JSON: {exc}")

    def _serve_static(self, path: str) -> bool:
        if self.static_dir is None:
            return False
        rel = path.lstrip("/") or "index.html"
        target = (self.static_dir / rel).resolve()
        if not str(target).startswith(str(self.static_dir.resolve())) or not target.is_file():
            return False
        content_types = {
            ".html": "text/html",
            ".js": "text/javascript",
            ".css": "text/css",
            ".json": "application/json",
            ".svg": "image/svg+xml",
        }
        data = target.read_bytes()
        self.send_response(200)
        self.send_header("Content-Type", content_types.get(target.suffix, "application/octet-stream"))
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)
        return True

    def do_GET(self):
        try:
            routes = {
                "/design": self.service.design,
                "/tables": self.service.tables,
                "/state": self.service.get_state,
                "/decision": self.service.decision,
                "/audit": self.service.audit,
            }
            handler = routes.get(self.path)
            if handler is not None:
                self._send_json(200, handler())
                return
            if self._serve_static(self.path):
                return
            self._send_error_json(404, "UNKNOWN_ROUTE", f"no route {self.path}")
        except ServiceError as exc:
            self._send_error_json(exc.status, exc.code, str(exc))

    def do_POST(self):
        try:
            body = self._read_body()
            if self.path == "/cohort":
                self._send_json(200, self.service.cohort(body))
            elif self.path == "/whatif":
                self._send_json(200, self.service.whatif(body))
            elif self.path == "/reset":
                self._send_json(200, self.service.reset())
            else:
                self._send_error_json(404, "UNKNOWN_ROUTE", f"no route {self.path}")
        except ServiceError as exc:
            self._send_error_json(exc.status, exc.code, str(exc))


def make_server(
    params: DesignParams,
    host: str = "127.0.0.1",
    port: int = 8777,
    state_dir: str | None = None,
    static_dir: str | None = None,
) -> ThreadingHTTPServer:
    """Build (but do not start) the HTTP server; caller runs serve_forever."""
    service = ConductService(params, state_dir=state_dir)
    handler = type(
        "BoundHandler",
        (_Handler,),
        {
            "service": service,
            "static_dir": Path(static_dir) if static_dir else None,
        },
    )
    server = ThreadingHTTPServer((host, port), handler)
    server.service = service  # convenient for tests
    return server
