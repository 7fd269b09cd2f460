"""``gridmix`` command line: run scenarios, compare cases, export MPS."""

from __future__ import annotations

import hashlib
import json
import logging
import os
import sys
from pathlib import Path

import click

from gridmix import __version__
from gridmix.builder import BuildOptions, LpProblem, build
from gridmix.mps import problems_equal, read_mps, write_mps
from gridmix.report import ReportError, compare_cases, extract_report, load_summary, write_report
from gridmix.scenario import (
    Scenario,
    ScenarioError,
    builtin_case_study,
    load_scenario,
    save_scenario,
    stress_scenario,
    truncate_horizon,
)
from gridmix.simplex import SolverOptions, Status, solve
from gridmix.verify import verify

log = logging.getLogger("gridmix")

EXIT_OK, EXIT_ERROR, EXIT_INFEASIBLE, EXIT_UNBOUNDED, EXIT_UNVERIFIED = 0, 1, 2, 3, 4

# The embedded dense-basis simplex is meant for desk-scale problems.
SOLVE_NNZ_LIMIT = 250_000

BUILTINS = {
    "case-study": lambda: builtin_case_study(hours=8760),
    "stress": stress_scenario,
}


def _setup_logging() -> None:
    level = os.environ.get("GRIDMIX_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


def _fail(msg: str, code: int = EXIT_ERROR) -> None:
    click.echo(f"error: {msg}", err=True)
    sys.exit(code)


def _file_digest(path: Path) -> str:
    h = hashlib.sha256()
    files = [path]
    if path.suffix == ".json":
        # series CSVs referenced from the config travel with it
        files += sorted(path.parent.glob(path.stem + "_*.csv"))
    for f in files:
        h.update(f.read_bytes())
    return h.hexdigest()


def resolve_scenario(source: str, reserves: str, hours: int | None, years: int | None) -> tuple[Scenario, str]:
    """Load ``source`` (a JSON path or ``builtin:<name>``) and apply overrides.

    Returns the scenario and a content digest of its source.
    """
    if source.startswith("builtin:"):
        key = source.split(":", 1)[1]
        if key not in BUILTINS:
            raise ScenarioError(f"unknown builtin scenario {key!r} (choose from {', '.join(BUILTINS)})")
        s = BUILTINS[key]()
        digest = hashlib.sha256(f"builtin:{key}:{__version__}".encode()).hexdigest()
    else:
        path = Path(source)
        s = load_scenario(path)
        digest = _file_digest(path)
    if hours is not None or years is not None:
        s = truncate_horizon(s, timeslots=hours, years=years)
    if reserves != "scenario":
        s = s.with_reserves(reserves == "on")
    return s, digest


def row_census(p: LpProblem) -> dict[str, int]:
    idx = p.row_index
    return {tag: idx.block(tag).size for tag in idx.tags()} if idx is not None else {}


def _dump(path: Path, doc: dict) -> None:
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


scenario_opt = click.option("--scenario", "scenario", required=True,
                            help="Scenario JSON file, or builtin:case-study / builtin:stress.")
hours_opt = click.option("--hours", type=click.IntRange(min=1), default=None,
                         help="Keep only the first N timeslots of each year.")
years_opt = click.option("--years", type=click.IntRange(min=1), default=None,
                         help="Keep only the first N years.")
reserves_opt = click.option("--reserves", type=click.Choice(["scenario", "on", "off"]), default="scenario",
                            show_default=True, help="Override the scenario's reserve switch.")


@click.group()
@click.version_option(__version__, prog_name="gridmix")
def cli() -> None:
    """Capacity-expansion energy-mix optimizer with regulation-reserve constraints."""
    _setup_logging()


@cli.command("run")
@scenario_opt
@reserves_opt
@hours_opt
@years_opt
@click.option("--out", "out_dir", type=click.Path(file_okay=False), required=True, help="Report directory.")
@click.option("--mps", "mps_path", type=click.Path(dir_okay=False), default=None, help="Also export the LP as MPS.")
@click.option("--feasibility-tol", type=float, default=None)
@click.option("--optimality-tol", type=float, default=None)
@click.option("--max-iterations", type=int, default=None)
@click.option("--refactor-interval", type=int, default=None)
@click.option("--no-presolve", is_flag=True, help="Skip presolve.")
@click.option("--verify/--no-verify", "do_verify", default=True, show_default=True)
@click.option("--tol", "verify_tol", type=float, default=1e-6, show_default=True, help="Verifier tolerance.")
@click.option("--force", is_flag=True, help="Solve even above the embedded size limit.")
def cmd_run(scenario, reserves, hours, years, out_dir, mps_path, feasibility_tol, optimality_tol,
            max_iterations, refactor_interval, no_presolve, do_verify, verify_tol, force) -> None:
    """Build, solve, verify and report one scenario."""
    config = {
        "scenario": scenario, "reserves": reserves, "hours": hours, "years": years,
        "solver": {k: v for k, v in {
            "feasibility_tol": feasibility_tol, "optimality_tol": optimality_tol,
            "max_iterations": max_iterations, "refactor_interval": refactor_interval,
        }.items() if v is not None},
        "presolve": not no_presolve, "verify": do_verify, "verify_tol": verify_tol,
    }
    try:
        s, digest = resolve_scenario(scenario, reserves, hours, years)
        options = SolverOptions(presolve=not no_presolve, **config["solver"])
        p, idx = build(s, BuildOptions())
    except (ScenarioError, OSError, ValueError) as exc:
        _fail(str(exc))
    config_hash = hashlib.sha256((json.dumps(config, sort_keys=True) + digest).encode()).hexdigest()

    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        if mps_path:
            write_mps(p, mps_path)
    except OSError as exc:
        _fail(str(exc))

    manifest = {
        "tool": "gridmix", "version": __version__, "config": config, "config_hash": config_hash,
        "scenario_digest": digest, "scenario_name": s.name, "reserves_enabled": "ReserveUp" in p.row_index,
        "rows": p.num_rows, "columns": p.num_cols, "nonzeros": int(p.A.nnz), "row_census": row_census(p),
    }
    if p.A.nnz > SOLVE_NNZ_LIMIT and not force:
        manifest["status"] = "NotSolved"
        _dump(out / "run.json", manifest)
        _fail(f"problem has {p.A.nnz} nonzeros, above the embedded solver limit of {SOLVE_NNZ_LIMIT}; "
              "use --hours to shrink it, export with --mps for an external solver, or pass --force")

    sol = solve(p, options)
    manifest.update(status=sol.status.value, objective=sol.objective if sol.optimal else None,
                    iterations=sol.iterations)
    click.echo(f"{s.name}: {sol.status.value} after {sol.iterations} iterations"
               + (f", objective {sol.objective:.10g}" if sol.optimal else ""))
    if sol.status is not Status.OPTIMAL:
        _dump(out / "run.json", manifest)
        code = {Status.INFEASIBLE: EXIT_INFEASIBLE, Status.UNBOUNDED: EXIT_UNBOUNDED}.get(sol.status, EXIT_ERROR)
        _fail(sol.message or sol.status.value, code)

    extra = {}
    passed = True
    if do_verify:
        vr = verify(p, sol, verify_tol)
        passed = vr.passed
        extra["verification"] = vr.to_dict()
        manifest["verified"] = passed
        click.echo(vr.to_table())
    report = extract_report(s, idx, sol, p)
    write_report(report, out, extra=extra)
    _dump(out / "run.json", manifest)
    if not passed:
        _fail(f"verification failed for {', '.join(vr.flagged_families()) or 'optimality checks'}", EXIT_UNVERIFIED)
    click.echo(f"report written to {out}")


@cli.command("compare")
@click.argument("dir1", type=click.Path())
@click.argument("dir2", type=click.Path())
@click.option("--year", type=int, default=-1, show_default=True, help="Year whose capacities are tabulated.")
def cmd_compare(dir1, dir2, year) -> None:
    """Side-by-side capacity table and curtailment of two report directories."""
    try:
        diff = compare_cases(load_summary(dir1), load_summary(dir2), labels=(Path(dir1).name, Path(dir2).name),
                             year=year)
    except (ReportError, KeyError, IndexError) as exc:
        _fail(str(exc))
    click.echo(diff.to_table())


@cli.command("export-mps")
@scenario_opt
@reserves_opt
@hours_opt
@years_opt
@click.option("--out", "mps_path", type=click.Path(dir_okay=False), required=True, help="MPS file to write.")
@click.option("--check/--no-check", default=True, show_default=True, help="Re-read the file and compare.")
def cmd_export_mps(scenario, reserves, hours, years, mps_path, check) -> None:
    """Build without solving and write MPS plus the name map."""
    try:
        s, _ = resolve_scenario(scenario, reserves, hours, years)
        p, _ = build(s)
        write_mps(p, mps_path)
    except (ScenarioError, OSError, ValueError) as exc:
        _fail(str(exc))
    if check and not problems_equal(p, read_mps(mps_path)):
        _fail("re-read MPS differs from the built problem")
    click.echo(f"wrote {mps_path}: {p.num_rows} rows, {p.num_cols} columns, {p.A.nnz} nonzeros")


@cli.command("write-scenario")
@click.argument("name", type=click.Choice(sorted(BUILTINS)))
@click.argument("out_dir", type=click.Path(file_okay=False))
@click.option("--hours", type=click.IntRange(min=1), default=None, help="Truncate before writing.")
@click.option("--stem", default=None, help="File stem (default: the builtin name).")
def cmd_write_scenario(name, out_dir, hours, stem) -> None:
    """Write a builtin scenario as JSON plus series CSVs."""
    s = BUILTINS[name]()
    if hours is not None:
        s = truncate_horizon(s, timeslots=hours)
    try:
        path = save_scenario(s, out_dir, stem or name.replace("-", "_"))
    except OSError as exc:
        _fail(str(exc))
    click.echo(f"wrote {path}")


def main(argv: list[str] | None = None) -> None:
    """Console entry point.  Usage errors exit with 1 (click's default of 2 means "infeasible" here)."""
    try:
        code = cli.main(args=argv, prog_name="gridmix", standalone_mode=False)
    except click.exceptions.Abort:
        click.echo("aborted", err=True)
        sys.exit(EXIT_ERROR)
    except click.ClickException as exc:
        exc.show()
        sys.exit(EXIT_ERROR)
    sys.exit(code if isinstance(code, int) else EXIT_OK)


if __name__ == "__main__":
    main()
