"""Command-line entry points: protocol tables, simulation, design
comparison, state-file decisions, and the local decision service."""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .engine import TrialState
from .rules import DesignParams, params_from_dict
from .simulate import (
    Scenario,
    aggregate_results,
    average_diffs,
    case_params,
    compare_designs,
    load_scenario_bank,
    replicate_results,
)
from .tables import (
    EXPANSION_HEADER,
    RDS_HEADER,
    SAFETY_HEADER,
    expansion_table,
    rds_table,
    safety_table,
    to_csv,
    to_markdown,
)

RESULT_COLUMNS = [
    "scenario",
    "design",
    "pct_correct_obd",
    "mean_duration_months",
    "mean_n_correct_obd",
    "mean_n_toxic",
    "replicates",
    "seed",
]


def design_options(fn):
    """Design-parameter flags shared by the table, simulation, and service commands."""
    options = [
        click.option("--num-doses", type=int, default=5, show_default=True),
        click.option("--start-dose", type=int, default=1, show_default=True),
        click.option("--phiT", "phi_t", type=float, default=0.35, show_default=True,
                     help="Maximum acceptable toxicity probability."),
        click.option("--psiE", "psi_e", type=float, default=0.25, show_default=True,
                     help="Minimum acceptable efficacy probability."),
        click.option("--theta", "thetas", type=float, multiple=True,
                     help="Cohort-expansion threshold(s); default 0.20."),
        click.option("--safety-cutoff", type=float, default=0.95, show_default=True),
        click.option("--futility-cutoff", type=float, default=0.90, show_default=True),
        click.option("--base-cohort", type=int, default=3, show_default=True),
        click.option("--expanded-cohort", type=int, default=6, show_default=True),
        click.option("--max-n", type=int, default=36, show_default=True),
        click.option("--per-dose-stop-n", type=int, default=12, show_default=True),
        click.option("--stop-rule/--no-stop-rule", "stop_rule", default=True,
                     show_default=True, help="Stop once the per-dose sample is reached."),
        click.option("--tox-window", type=float, default=45.0, show_default=True,
                     help="Toxicity assessment window (days)."),
        click.option("--eff-window", type=float, default=60.0, show_default=True,
                     help="Efficacy assessment window (days)."),
        click.option("--accrual-rate", type=float, default=3.0, show_default=True,
                     help="Patients per month."),
    ]
    for option in reversed(options):
        fn = option(fn)
    return fn


def _params_from_flags(kwargs, theta: float = 0.20, adaptive: bool = True) -> DesignParams:
    return DesignParams(
        num_doses=kwargs["num_doses"],
        start_dose=kwargs["start_dose"],
        phi_t=kwargs["phi_t"],
        psi_e=kwargs["psi_e"],
        theta=theta,
        safety_cutoff=kwargs["safety_cutoff"],
        futility_cutoff=kwargs["futility_cutoff"],
        base_cohort=kwargs["base_cohort"],
        expanded_cohort=kwargs["expanded_cohort"],
        max_n=kwargs["max_n"],
        per_dose_stop_n=kwargs["per_dose_stop_n"],
        stop_rule_enabled=kwargs["stop_rule"],
        tox_window_days=kwargs["tox_window"],
        eff_window_days=kwargs["eff_window"],
        accrual_rate_per_month=kwargs["accrual_rate"],
        adaptive=adaptive,
    )


def _apply_case(params: DesignParams, case: str | None) -> DesignParams:
    if case is None:
        return params
    preset = case_params(case)
    return DesignParams(
        **{
            **params.__dict__,
            "stop_rule_enabled": preset.stop_rule_enabled,
            "eff_window_days": preset.eff_window_days,
            "tox_window_days": preset.tox_window_days,
        }
    )


def _write(path: Path, text: str) -> None:
    path.write_text(text, encoding="utf-8")
    click.echo(f"wrote {path}")


def _emit_table(out: Path, stem: str, rows, header, fmt: str) -> None:
    if fmt in ("csv", "both"):
        _write(out / f"{stem}.csv", to_csv(rows, header))
    if fmt in ("markdown", "both"):
        _write(out / f"{stem}.md", to_markdown(rows, header))


@click.group()
@click.version_option()
def main():
    """BOIN12 dose-finding with adaptive cohort sizing."""


@main.command()
@design_options
@click.option("--out", type=click.Path(file_okay=False), default=".", show_default=True)
@click.option("--format", "fmt", type=click.Choice(["csv", "markdown", "both"]),
              default="both", show_default=True)
def tables(out, fmt, thetas, **kwargs):
    """Write the protocol decision tables (safety, rank, expansion)."""
    thetas = thetas or (0.20,)
    params = _params_from_flags(kwargs, theta=thetas[0])
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    _emit_table(out_dir, "safety_table", safety_table(params), SAFETY_HEADER, fmt)
    _emit_table(out_dir, "rds_table", rds_table(params), RDS_HEADER, fmt)
    for theta in thetas:
        rows = expansion_table(params, theta=theta)
        _emit_table(out_dir, f"expansion_table_theta{theta:.2f}", rows, EXPANSION_HEADER, fmt)


def _load_bank(scenario_path: str | None) -> list[Scenario]:
    try:
        return load_scenario_bank(scenario_path)
    except (OSError, ValueError, json.JSONDecodeError) as exc:
        raise click.ClickException(f"cannot load scenario bank: {exc}")


def _result_row(name: str, design: str, oc, seed: int) -> list[str]:
    return [
        name,
        design,
        str(oc.pct_correct_obd),
        str(oc.mean_duration_months),
        str(oc.mean_n_at_correct_obd),
        str(oc.mean_n_at_toxic_doses),
        str(oc.replicates),
        str(seed),
    ]


def _replicate_log_rows(name: str, design: str, results, num_doses: int):
    header = [
        "scenario", "design", "replicate", "selected_obd", "duration_days", "stop_reason",
    ] + [f"n_dose{i}" for i in range(1, num_doses + 1)]
    rows = [
        [name, design, str(r.seed_id), "" if r.selected_obd is None else str(r.selected_obd),
         str(r.duration_days), r.stop_reason] + [str(n) for n in r.per_dose_n]
        for r in results
    ]
    return header, rows


def _write_csv_rows(path: Path, header: list[str], rows: list[list[str]]) -> None:
    text = ",".join(header) + "\n" + "".join(",".join(row) + "\n" for row in rows)
    _write(path, text)


@main.command()
@design_options
@click.option("--scenarios", "scenario_path", type=click.Path(exists=True, dir_okay=False),
              default=None, help="Scenario bank JSON; defaults to the bundled bank.")
@click.option("--case", type=click.Choice(["A", "B", "C", "D"], case_sensitive=False),
              default=None, help="Preset stopping-rule/window configuration.")
@click.option("--replicates", type=int, default=1000, show_default=True)
@click.option("--seed", type=int, default=1, show_default=True)
@click.option("--threads", type=int, default=1, show_default=True)
@click.option("--out", type=click.Path(file_okay=False), default=".", show_default=True)
@click.option("--fixed-cohort", is_flag=True, default=False,
              help="Disable adaptive expansion (plain fixed-cohort design).")
@click.option("--replicate-log", is_flag=True, default=False,
              help="Also write one row per simulated trial.")
@click.option("--figure/--no-figure", default=True, show_default=True)
def simulate(scenario_path, case, replicates, seed, threads, out, fixed_cohort,
             replicate_log, figure, thetas, **kwargs):
    """Simulate operating characteristics over a scenario bank."""
    theta = (thetas or (0.20,))[0]
    params = _apply_case(_params_from_flags(kwargs, theta=theta, adaptive=not fixed_cohort), case)
    bank = _load_bank(scenario_path)
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    design = "fixed" if fixed_cohort else "adaptive"
    rows, log_rows, oc_by_name = [], [], []
    log_header = None
    for index, scenario in enumerate(bank):
        results = replicate_results(scenario, params, replicates, seed, threads, index)
        oc = aggregate_results(results, scenario, params)
        oc_by_name.append((scenario.name, oc))
        rows.append(_result_row(scenario.name, design, oc, seed))
        if replicate_log:
            log_header, scenario_rows = _replicate_log_rows(
                scenario.name, design, results, params.num_doses
            )
            log_rows.extend(scenario_rows)
    _write_csv_rows(out_dir / "oc_results.csv", RESULT_COLUMNS, rows)
    if replicate_log:
        _write_csv_rows(out_dir / "replicate_log.csv", log_header, log_rows)
    if figure:
        from .figures import save_simulation_figure

        label = f"case {case}" if case else "custom configuration"
        save_simulation_figure(
            oc_by_name, str(out_dir / "oc_results.png"),
            title=f"Operating characteristics, {design} design ({label})",
        )
        click.echo(f"wrote {out_dir / 'oc_results.png'}")


@main.command()
@design_options
@click.option("--scenarios", "scenario_path", type=click.Path(exists=True, dir_okay=False),
              default=None, help="Scenario bank JSON; defaults to the bundled bank.")
@click.option("--case", type=click.Choice(["A", "B", "C", "D"], case_sensitive=False),
              default=None, help="Preset stopping-rule/window configuration.")
@click.option("--replicates", type=int, default=1000, show_default=True)
@click.option("--seed", type=int, default=1, show_default=True)
@click.option("--threads", type=int, default=1, show_default=True)
@click.option("--out", type=click.Path(file_okay=False), default=".", show_default=True)
@click.option("--figure/--no-figure", default=True, show_default=True)
def compare(scenario_path, case, replicates, seed, threads, out, figure, thetas, **kwargs):
    """Compare adaptive cohort sizing against the fixed-cohort design."""
    theta = (thetas or (0.20,))[0]
    params_ad = _apply_case(_params_from_flags(kwargs, theta=theta, adaptive=True), case)
    params_base = _apply_case(_params_from_flags(kwargs, theta=theta, adaptive=False), case)
    bank = _load_bank(scenario_path)
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    comparisons = compare_designs(bank, params_ad, params_base, replicates, seed, threads)

    rows = []
    for comp in comparisons:
        rows.append(_result_row(comp.scenario, "adaptive", comp.adaptive, seed))
        rows.append(_result_row(comp.scenario, "fixed", comp.base, seed))
    _write_csv_rows(out_dir / "comparison_results.csv", RESULT_COLUMNS, rows)

    diff_header = ["scenario"] + list(comparisons[0].diffs)
    diff_rows = [
        [comp.scenario] + [str(comp.diffs[k]) for k in comparisons[0].diffs]
        for comp in comparisons
    ]
    averages = average_diffs(comparisons)
    diff_rows.append(["average"] + [str(averages[k]) for k in comparisons[0].diffs])
    _write_csv_rows(out_dir / "comparison_differences.csv", diff_header, diff_rows)

    click.echo(
        "average duration reduction: %.2f%%; average correct-selection difference: %+.2f points"
        % (averages["duration_reduction_pct"], averages["pct_correct_obd"])
    )
    if figure:
        from .figures import save_comparison_figure

        label = f"case {case}" if case else "custom configuration"
        save_comparison_figure(
            comparisons, str(out_dir / "comparison.png"),
            title=f"Adaptive vs fixed cohort size ({label})",
        )
        click.echo(f"wrote {out_dir / 'comparison.png'}")


@main.command()
@click.argument("state_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--json", "as_json", is_flag=True, default=False, help="Machine-readable output.")
def decide(state_file, as_json):
    """Report the next-dose recommendation for a saved trial state."""
    try:
        state = TrialState.from_json(Path(state_file).read_text(encoding="utf-8"))
    except (ValueError, KeyError, TypeError) as exc:
        raise click.ClickException(f"invalid trial state document: {exc}")
    rec = state.current_recommendation()
    if as_json:
        click.echo(json.dumps(rec, indent=2, sort_keys=True))
        return
    if rec["trial_stopped"]:
        click.echo(f"trial stopped ({rec['status']})")
        selection = rec["final_selection"]
        click.echo(
            "final selection: dose %s" % selection
            if selection is not None
            else "final selection: none (no admissible dose)"
        )
        return
    click.echo(f"next dose: {rec['next_dose']}")
    click.echo(f"next cohort size: {rec['next_cohort_size']}")
    decision = rec["decision"]
    if decision:
        click.echo(f"action: {decision['action']}")
        boundary = decision["rationale"].get("boundary")
        if boundary:
            click.echo(
                "toxicity boundary at n=%d: escalate if tox <= %d, de-escalate if tox >= %d (%s)"
                % (
                    boundary["n"],
                    boundary["escalate_if_tox_le"],
                    boundary["deescalate_if_tox_ge"],
                    boundary["region"],
                )
            )
        candidates = decision["rationale"].get("candidates", {})
        for dose, dp in candidates.items():
            click.echo(f"  dose {dose}: desirability probability {dp:.4f}")
        expansion = decision["rationale"].get("expansion")
        if expansion:
            click.echo(
                "expansion: qualifies=%s (dp=%.4f vs theta=%.2f)%s%s"
                % (
                    expansion["qualifies"],
                    expansion["dp"],
                    expansion["theta"],
                    ", capped by max sample size" if expansion["capped_by_max_n"] else "",
                    ", capped by per-dose stopping rule"
                    if expansion.get("capped_by_stop_rule")
                    else "",
                )
            )


@main.command()
@design_options
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8777, show_default=True)
@click.option("--state-dir", type=click.Path(file_okay=False), default=None,
              help="Directory for the write-ahead log (enables crash recovery).")
@click.option("--static-dir", type=click.Path(file_okay=False, exists=True), default=None,
              help="Serve a browser UI from this directory at /.")
@click.option("--params-file", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Load design parameters from JSON instead of flags.")
def serve(host, port, state_dir, static_dir, params_file, thetas, **kwargs):
    """Run the local decision service (localhost only, no authentication)."""
    from .service import make_server

    if params_file:
        params = params_from_dict(json.loads(Path(params_file).read_text(encoding="utf-8")))
    else:
        params = _params_from_flags(kwargs, theta=(thetas or (0.20,))[0])
    server = make_server(params, host=host, port=port, state_dir=state_dir,
                         static_dir=static_dir)
    click.echo(f"decision service listening on http://{host}:{server.server_address[1]}")
    click.echo("single-operator tool: no authentication, keep it on localhost")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        server.shutdown()


if __name__ == "__main__":
    main(prog_name="adboin12", args=sys.argv[1:])
