"""Protocol-ready decision tables: safety boundaries, desirability ranks,
and cohort-expansion conditions.

These tables let a trial be conducted by hand, with no computation at
the bedside: the safety table gives the escalate/de-escalate toxicity
counts per number treated, the rank table orders every reachable
(n, #tox, #eff) outcome by desirability probability, and the expansion
tables list the smallest efficacy count at which the next cohort is
enlarged.

Generation is deterministic: regenerating any table with the same design
parameters reproduces it exactly.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

from .rules import (
    DesignParams,
    count_boundaries,
    desirability_from_marginals,
    interval_boundaries,
)

SAFETY_HEADER = ["n", "escalate_if_tox_le", "deescalate_if_tox_ge"]
RDS_HEADER = ["n", "tox", "eff", "dp", "rank"]
EXPANSION_HEADER = ["n", "tox", "min_eff"]


@dataclass(frozen=True)
class SafetyRow:
    n: int
    escalate_if_tox_le: int
    deescalate_if_tox_ge: int


@dataclass(frozen=True)
class RdsRow:
    n: int
    tox: int
    eff: int
    dp: float
    rank: int


@dataclass(frozen=True)
class ExpansionRow:
    n: int
    tox: int
    min_eff: int


def default_safety_grid(params: DesignParams) -> list[int]:
    """Cohort-multiple counts at which a dose-assignment decision can occur,
    i.e. base_cohort up to max_n - base_cohort."""
    step = params.base_cohort
    return list(range(step, params.max_n - step + 1, step))


def default_rds_grid(params: DesignParams) -> list[int]:
    """Cohort multiples from 0 (untried) up to max_n."""
    step = params.base_cohort
    return list(range(0, params.max_n + 1, step))


def default_expansion_grid(params: DesignParams) -> list[int]:
    """Cohort multiples at which an expansion decision can still be taken.

    With the per-dose stopping rule a dose reaching per_dose_stop_n patients
    is never assigned another cohort, so the grid tops out one base cohort
    below that (or below max_n when the rule is disabled).
    """
    step = params.base_cohort
    cap = params.per_dose_stop_n if params.stop_rule_enabled else params.max_n
    cap = min(cap, params.max_n)
    return list(range(step, cap - step + 1, step))


def safety_table(params: DesignParams, n_grid: list[int] | None = None) -> list[SafetyRow]:
    """Escalate/de-escalate toxicity-count boundaries for each n in the grid."""
    if n_grid is None:
        n_grid = default_safety_grid(params)
    bp = interval_boundaries(params)
    rows = []
    for n in n_grid:
        esc, deesc = count_boundaries(bp, n)
        rows.append(SafetyRow(n=n, escalate_if_tox_le=esc, deescalate_if_tox_ge=deesc))
    return rows


def rds_table(
    params: DesignParams,
    n_grid: list[int] | None = None,
    per_dose_cap: int | None = None,
) -> list[RdsRow]:
    """Rank every (n, tox, eff) outcome over the grid by desirability probability.

    Ranks run 1..K in ascending desirability, so higher rank means a more
    desirable outcome.  Ties (exactly equal probabilities) are broken by
    (n ascending, tox descending, eff ascending) for deterministic output.
    """
    if n_grid is None:
        n_grid = default_rds_grid(params)
    if per_dose_cap is not None:
        n_grid = [n for n in n_grid if n <= per_dose_cap]
    cells = []
    for n in n_grid:
        for tox in range(n + 1):
            for eff in range(n + 1):
                dp = desirability_from_marginals(n, tox, eff, params)
                cells.append((n, tox, eff, dp))
    cells.sort(key=lambda cell: (cell[3], cell[0], -cell[1], cell[2]))
    return [
        RdsRow(n=n, tox=tox, eff=eff, dp=dp, rank=i + 1)
        for i, (n, tox, eff, dp) in enumerate(cells)
    ]


def expansion_table(
    params: DesignParams,
    theta: float | None = None,
    n_grid: list[int] | None = None,
) -> list[ExpansionRow]:
    """Smallest efficacy count triggering cohort expansion, per (n, tox).

    Rows cover toxicity counts strictly below the de-escalation boundary for
    each n; at or above that boundary the dose is leaving the candidate set,
    so the protocol table omits those rows.  (n, tox) pairs where no efficacy
    count up to n clears theta are omitted as well.
    """
    if theta is None:
        theta = params.theta
    if not 0.0 < theta < 1.0:
        raise ValueError(f"theta must lie in (0, 1), got {theta}")
    if n_grid is None:
        n_grid = default_expansion_grid(params)
    bp = interval_boundaries(params)
    rows = []
    for n in n_grid:
        _, deesc = count_boundaries(bp, n)
        for tox in range(min(deesc, n + 1)):
            min_eff = None
            for eff in range(n + 1):
                if desirability_from_marginals(n, tox, eff, params) > theta:
                    min_eff = eff
                    break
            if min_eff is not None:
                rows.append(ExpansionRow(n=n, tox=tox, min_eff=min_eff))
    return rows


def _format_cell(value) -> str:
    # Probabilities carry 4 decimals (round-half-even via float formatting);
    # whole numbers stay exact.
    if isinstance(value, bool):
        return str(value)
    if isinstance(value, float):
        return f"{value:.4f}"
    return str(value)


def _row_cells(row) -> list[str]:
    return [_format_cell(getattr(row, name)) for name in row.__dataclass_fields__]


def to_csv(rows: list, header: list[str]) -> str:
    out = io.StringIO()
    out.write(",".join(header) + "\n")
    for row in rows:
        out.write(",".join(_row_cells(row)) + "\n")
    return out.getvalue()


def to_markdown(rows: list, header: list[str]) -> str:
    out = io.StringIO()
    out.write("| " + " | ".join(header) + " |\n")
    out.write("|" + "|".join(" --- " for _ in header) + "|\n")
    for row in rows:
        out.write("| " + " | ".join(_row_cells(row)) + " |\n")
    return out.getvalue()
