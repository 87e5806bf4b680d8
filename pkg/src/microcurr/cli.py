"""Command line front end: run experiments, evaluate trees directly,
check scripts, and render run reports."""

from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction
from pathlib import Path

from . import orchestrator
from .arena import run_episode
from .catalog import CatalogError, shipped_catalog
from .config import ConfigError, load_config
from .designer import format_history
from .domain import (
    DomainError,
    PerformanceReport,
    canonical_text,
    curriculum_from_dict,
    decode_rational,
    percent,
    report_to_dict,
    stock_final_task,
)
from .dsl import ParseError, ValidationError, parse, print_tree, validate
from .llm import BackendError, HttpBackend, ReplayBackend, ScriptedBackend

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_BACKEND = 3
EXIT_CAP = 4

TABLE_HEADERS = ("Path", "Task", "Agent Composition", "Enemy Composition", "Result")


def _fail(message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return EXIT_CONFIG


def build_backend(bc):
    if bc.mode == "scripted":
        if not bc.fixture_path:
            raise ConfigError("scripted backend needs fixture_path")
        return ScriptedBackend.from_file(bc.fixture_path)
    if bc.mode == "replay":
        if not bc.transcript_path:
            raise ConfigError("replay backend needs transcript_path")
        return ReplayBackend(bc.transcript_path)
    return HttpBackend(
        bc.endpoint, bc.api_key_env, bc.model, models=bc.models, timeout=bc.timeout
    )


def resolve_final_task(config, catalog):
    if config.final_task is not None:
        return curriculum_from_dict(config.final_task, catalog)
    if config.final_task_path:
        raw = json.loads(Path(config.final_task_path).read_text(encoding="utf-8"))
        return curriculum_from_dict(raw, catalog)
    return stock_final_task(catalog)


def cmd_run(args) -> int:
    try:
        config = load_config(args.config)
        catalog = orchestrator.resolve_catalog(config)
        final = resolve_final_task(config, catalog)
    except (ConfigError, CatalogError, DomainError) as exc:
        return _fail(str(exc))
    except (OSError, json.JSONDecodeError) as exc:
        return _fail(f"cannot load final task: {exc}")

    try:
        backend = build_backend(config.backend)
    except ConfigError as exc:
        return _fail(str(exc))
    except BackendError as exc:
        print(f"backend error: {exc}", file=sys.stderr)
        return EXIT_BACKEND

    def progress(record):
        print(format_history([record], 1))
        sys.stdout.flush()

    try:
        if args.resume:
            if not config.run_dir:
                return _fail("config.run_dir is not set")
            state = orchestrator.resume(
                config.run_dir, backend, on_iteration=progress
            )
        else:
            state = orchestrator.run(final, config, backend, on_iteration=progress)
    except BackendError as exc:
        print(f"backend error: {exc}", file=sys.stderr)
        return EXIT_BACKEND
    except orchestrator.OrchestratorError as exc:
        return _fail(str(exc))
    return EXIT_OK if state.status == "success" else EXIT_CAP


def cmd_simulate(args) -> int:
    catalog = shipped_catalog()
    try:
        raw = json.loads(Path(args.curriculum).read_text(encoding="utf-8"))
        spec = curriculum_from_dict(raw, catalog)
    except (OSError, json.JSONDecodeError) as exc:
        return _fail(f"cannot load curriculum: {exc}")
    except (DomainError, CatalogError) as exc:
        return _fail(str(exc))
    try:
        tree = validate(parse(Path(args.tree).read_text(encoding="utf-8")), catalog)
    except OSError as exc:
        return _fail(f"cannot read tree: {exc}")
    except ParseError as exc:
        return _fail(f"parse error: {exc}")
    except ValidationError as exc:
        return _fail(f"validation error: {exc}")

    episodes = args.episodes if args.episodes is not None else spec.objective.episodes
    trace = None
    if args.trace:
        trace = lambda line: print(line, file=sys.stderr)
    results = [
        run_episode(spec, tree, args.seed + i, catalog, trace=trace)
        for i in range(episodes)
    ]
    wins = sum(1 for r in results if r.metrics.win)
    report = PerformanceReport(
        win_rate=Fraction(wins, episodes),
        episodes=tuple(r.metrics for r in results),
    )
    sys.stdout.write(canonical_text(report_to_dict(report)))
    return EXIT_OK


def _composition(units: list[dict]) -> str:
    parts = []
    for unit in units:
        techs = sorted(unit.get("technologies", []))
        if techs:
            parts.append(f"{unit['unit_type']} ({unit['count']}, {'+'.join(techs)})")
        else:
            parts.append(f"{unit['unit_type']} ({unit['count']})")
    return ", ".join(parts)


def _result_cell(record: dict) -> str:
    if record["outcome"] == "Failed":
        return "Failed"
    return f"{percent(decode_rational(record['report']['win_rate']))}%"


def render_table(manifest: dict) -> str:
    label = manifest["config"]["run_label"]
    rows = [
        (
            label,
            str(rec["index"] + 1),  # records are 0-based, Task column 1-based
            _composition(rec["curriculum"]["agents"]),
            _composition(rec["curriculum"]["enemies"]),
            _result_cell(rec),
        )
        for rec in manifest["iterations"]
    ]
    widths = [len(h) for h in TABLE_HEADERS]
    for row in rows:
        for i, cell in enumerate(row):
            widths[i] = max(widths[i], len(cell))

    def fmt(cells) -> str:
        return "  ".join(c.ljust(widths[i]) for i, c in enumerate(cells)).rstrip()

    lines = [fmt(TABLE_HEADERS)]
    lines.extend(fmt(row) for row in rows)
    return "\n".join(lines) + "\n"


def render_dot(manifest: dict) -> str:
    lines = [
        "digraph curriculum {",
        "  // legend: green = Success, red = Failed;"
        " a doubled border marks the terminal task",
        "  rankdir=LR;",
        "  node [shape=box];",
    ]
    records = manifest["iterations"]
    total = len(records)
    for rec in records:
        index = rec["index"]
        label = (
            f"#{index + 1} {_composition(rec['curriculum']['agents'])}"
            f" vs {_composition(rec['curriculum']['enemies'])}"
            f"\\n{_result_cell(rec)}"
        ).replace('"', '\\"')
        color = "red" if rec["outcome"] == "Failed" else "green"
        terminal = index == total - 1 and manifest["status"] == "success"
        peripheries = 2 if terminal else 1
        lines.append(
            f'  n{index} [label="{label}", color={color}, peripheries={peripheries}];'
        )
    for rec in records[1:]:
        lines.append(f"  n{rec['index'] - 1} -> n{rec['index']};")
    lines.append("}")
    return "\n".join(lines) + "\n"


def cmd_report(args) -> int:
    path = Path(args.run) / "run.json"
    try:
        manifest = json.loads(path.read_text(encoding="utf-8"))["manifest"]
    except (OSError, json.JSONDecodeError, KeyError, TypeError) as exc:
        return _fail(f"cannot read run manifest {path}: {exc}")
    try:
        text = render_table(manifest) if args.format == "table" else render_dot(manifest)
    except (KeyError, TypeError, ValueError) as exc:
        return _fail(f"malformed run manifest {path}: {exc}")
    sys.stdout.write(text)
    return EXIT_OK


def cmd_dsl_check(args) -> int:
    try:
        text = Path(args.path).read_text(encoding="utf-8")
    except OSError as exc:
        return _fail(f"cannot read {args.path}: {exc}")
    try:
        tree = validate(parse(text), shipped_catalog())
    except ParseError as exc:
        return _fail(f"parse error: {exc}")
    except ValidationError as exc:
        return _fail(f"validation error: {exc}")
    sys.stdout.write(print_tree(tree))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="microcurr",
        description="Curriculum-driven behavior tree evolution for squad combat.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="drive a full curriculum run from a config file")
    p.add_argument("--config", required=True, help="JSON config file")
    p.add_argument(
        "--resume", action="store_true",
        help="continue from the run directory's checkpoint",
    )

    p = sub.add_parser("simulate", help="evaluate one tree on one curriculum")
    p.add_argument("--curriculum", required=True, help="curriculum JSON file")
    p.add_argument("--tree", required=True, help="decision-tree script file")
    p.add_argument("--episodes", type=int, default=None)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument(
        "--trace", action="store_true",
        help="dump per-tick state lines to standard error",
    )

    p = sub.add_parser("report", help="render a finished run")
    p.add_argument("--run", required=True, help="run directory")
    p.add_argument("--format", choices=("table", "dot"), default="table")

    p = sub.add_parser("dsl-check", help="parse and validate a tree script")
    p.add_argument("path")

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handlers = {
        "run": cmd_run,
        "simulate": cmd_simulate,
        "report": cmd_report,
        "dsl-check": cmd_dsl_check,
    }
    return handlers[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
