"""robomut command line: parse, mutate, run, score, sim."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Optional, Sequence

from .harness import HarnessError, SuiteError, load_suite, run_experiment
from .mutation import PRESETS, CatalogError, catalog_from_dict, catalog_to_dict, generate_catalog
from .program import ParseError, Program, format_number, iter_sites, parse_program, validate_program
from .report import build_report, emit_report, load_report, render_scores, report_scores, sha256_file
from .world import ScenarioError, ScenarioSpec, SensorFault, load_scenario, run_program

EXIT_OK, EXIT_USAGE, EXIT_INPUT, EXIT_GATE, EXIT_IO = 0, 1, 2, 3, 4


class _InputError(Exception):
    """Malformed or invalid input file (exit 2)."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="robomut", description="Mutation testing for robot command programs.")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    sp = sub.add_parser("parse", help="parse and validate a program, list its mutation sites")
    sp.add_argument("program")
    sp.add_argument("--scenario", help="also check location names and channels against a scenario")

    sm = sub.add_parser("mutate", help="generate a mutant catalog")
    sm.add_argument("program")
    sm.add_argument("--scenario", required=True)
    sm.add_argument("--ops", choices=PRESETS, default="table3")
    sm.add_argument("--out", required=True)

    sr = sub.add_parser("run", help="run a suite against every mutant over seeded rounds")
    sr.add_argument("program")
    sr.add_argument("--scenario", required=True)
    sr.add_argument("--suite", required=True)
    sr.add_argument("--mutants", required=True)
    sr.add_argument("--rounds", type=int, help="defaults to the suite's value")
    sr.add_argument("--seed", type=int, help="master seed; defaults to the suite's value")
    sr.add_argument("--report", required=True)
    sr.add_argument("--parallel", type=int, default=1)
    sr.add_argument("--include-infeasible", action="store_true")
    sr.add_argument("--include-invalid", action="store_true")

    sc = sub.add_parser("score", help="print the per-round score table of a report")
    sc.add_argument("report")

    ss = sub.add_parser("sim", help="execute a program once")
    ss.add_argument("program")
    ss.add_argument("--scenario", required=True)
    ss.add_argument("--seed", type=int, default=0)
    ss.add_argument("--trace", action="store_true", help="print one line per step")
    ss.add_argument("--fault", action="append", default=[], metavar="CHANNEL:KIND[:WINDOW]",
                    help="inject a sensor fault, e.g. box.0.x:negate:initial (repeatable)")
    return p


def _read_text(path: str) -> str:
    return Path(path).read_text(encoding="utf-8")


def _load_program(path: str) -> Program:
    try:
        return parse_program(_read_text(path))
    except ParseError as exc:
        raise _InputError(f"{path}:{exc}") from exc


def _load_scenario(path: str) -> ScenarioSpec:
    try:
        return load_scenario(path)
    except (ScenarioError, json.JSONDecodeError) as exc:
        raise _InputError(f"{path}: {exc}") from exc


def _pose(values) -> str:
    return "(" + ", ".join(format_number(round(v, 9)) for v in values) + ")"


def _cmd_parse(args) -> int:
    program = _load_program(args.program)
    scenario = _load_scenario(args.scenario) if args.scenario else None
    violations = validate_program(program, scenario)
    for v in violations:
        print(f"{v.site}\t{v.code}\t{v.message}", file=sys.stderr)
    if violations:
        return EXIT_INPUT
    sites = list(iter_sites(program))
    print(f"ok: {len(program.statements)} top-level statements, {len(sites)} sites")
    for site, _node in sites:
        print(site)
    return EXIT_OK


def _cmd_mutate(args) -> int:
    program = _load_program(args.program)
    scenario = _load_scenario(args.scenario)
    violations = validate_program(program, scenario)
    if violations:
        raise _InputError("; ".join(f"{v.site}: {v.message}" for v in violations))
    try:
        catalog = generate_catalog(program, scenario, args.ops, scenario_ref=sha256_file(args.scenario))
    except CatalogError as exc:
        raise _InputError(str(exc)) from exc
    Path(args.out).write_text(json.dumps(catalog_to_dict(catalog), indent=2) + "\n", encoding="utf-8")
    print(f"{len(catalog)} mutants written to {args.out}")
    return EXIT_OK


def _cmd_run(args) -> int:
    if args.parallel < 1:
        print("robomut: error: --parallel must be at least 1", file=sys.stderr)
        return EXIT_USAGE
    if args.rounds is not None and args.rounds < 1:
        print("robomut: error: --rounds must be at least 1", file=sys.stderr)
        return EXIT_USAGE
    program = _load_program(args.program)
    scenario = _load_scenario(args.scenario)
    try:
        suite = load_suite(args.suite)
    except (SuiteError, json.JSONDecodeError) as exc:
        raise _InputError(f"{args.suite}: {exc}") from exc
    try:
        catalog = catalog_from_dict(json.loads(_read_text(args.mutants)), program)
    except (CatalogError, ParseError, KeyError, ValueError) as exc:
        raise _InputError(f"{args.mutants}: {exc}") from exc
    try:
        result = run_experiment(program, scenario, catalog, suite, rounds=args.rounds, master_seed=args.seed,
                                parallel=args.parallel, include_invalid=args.include_invalid,
                                include_infeasible=args.include_infeasible)
    except SuiteError as exc:
        raise _InputError(f"{args.suite}: {exc}") from exc
    except HarnessError as exc:
        print(f"robomut: gate failed: {exc}", file=sys.stderr)
        return EXIT_GATE
    inputs = {name: sha256_file(path) for name, path in
              (("program", args.program), ("scenario", args.scenario),
               ("catalog", args.mutants), ("suite", args.suite))}
    emit_report(build_report(result, inputs), args.report)
    if not catalog.mutants:
        print("robomut: warning: catalog has no mutants; score is undefined", file=sys.stderr)
    print(render_scores([p.score for p in result.scores.per_round]), end="")
    return EXIT_OK


def _cmd_score(args) -> int:
    try:
        scores = report_scores(load_report(args.report))
    except (KeyError, TypeError, json.JSONDecodeError) as exc:
        raise _InputError(f"{args.report}: malformed report ({exc})") from exc
    print(render_scores(scores), end="")
    return EXIT_OK


def _cmd_sim(args) -> int:
    program = _load_program(args.program)
    scenario = _load_scenario(args.scenario)
    violations = validate_program(program, scenario)
    if violations:
        raise _InputError("; ".join(f"{v.site}: {v.message}" for v in violations))
    try:
        faults = [SensorFault.from_spec(f, scenario.noise_default) for f in args.fault]
    except ValueError as exc:
        print(f"robomut: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    trace = run_program(program, scenario, faults, seed=args.seed)
    if args.trace:
        for i, step in enumerate(trace.steps):
            site = "-" if step.site is None else str(step.site)
            print(f"{i}\t{site}\t{step.command}\t{_pose(step.state.effector)}")
    final = trace.final
    print(f"status: {trace.status}" + (f" at {trace.error_site}: {trace.error}" if trace.error else ""))
    print(f"effector: {_pose(final.effector)} heading: {format_number(final.heading)} gripper: {final.gripper}")
    for b in final.boxes:
        print(f"box {b.id} ({b.color}): {_pose(b.position)} on {b.supported_on}")
    return EXIT_OK


_COMMANDS = {"parse": _cmd_parse, "mutate": _cmd_mutate, "run": _cmd_run, "score": _cmd_score, "sim": _cmd_sim}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse usage errors and --help
        return int(exc.code or 0)
    if args.command is None:
        parser.print_help(sys.stderr)
        return EXIT_USAGE
    try:
        return _COMMANDS[args.command](args)
    except _InputError as exc:
        print(f"robomut: invalid input: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"robomut: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
