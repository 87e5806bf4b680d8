"""Outer curriculum loop: designer, coder, and arena wired into a
resumable, fully persisted run."""

from __future__ import annotations

import hashlib
import json
import os
from pathlib import Path

from .arena import evaluate
from .catalog import UnitCatalog, load_catalog, shipped_catalog
from .coder import Coder, CodeFormat, Feedback, ImproveResult, dsl_format
from .config import EngineConfig, config_from_dict, config_to_dict
from .designer import Designer, simplify
from .domain import (
    CurriculumSpec,
    IterationRecord,
    Outcome,
    RunState,
    canonical_text,
    curriculum_from_dict,
    curriculum_to_dict,
    normalize_spec,
    record_from_dict,
    record_to_dict,
    report_to_dict,
    spec_equals,
)
from .dsl import Attack, GroupPolicy, NearestEnemy, make_tree
from .llm import BackendError, RecordingBackend


class OrchestratorError(Exception):
    pass


class CorruptCheckpoint(OrchestratorError):
    """Checkpoint digest does not match its content."""


def baseline_tree(final: CurriculumSpec, catalog: UnitCatalog):
    """Starting template: every agent type attacks the nearest enemy."""
    final = normalize_spec(final)
    groups = tuple(
        GroupPolicy(u.unit_type, Attack(NearestEnemy())) for u in final.agents
    )
    return make_tree(groups)


def resolve_catalog(config: EngineConfig) -> UnitCatalog:
    if config.catalog_path:
        return load_catalog(config.catalog_path)
    return shipped_catalog()


def arena_evaluator_factory(config: EngineConfig, catalog: UnitCatalog):
    """Per-iteration evaluator; each iteration gets its own seed block so
    episode seeds never collide across iterations."""

    def for_iteration(index: int):
        base = config.base_seed + index * config.seed_stride

        def run_eval(spec, tree):
            return evaluate(
                spec, tree, base, catalog, workers=config.parallel_workers
            )

        return run_eval

    return for_iteration


class _CountingBackend:
    """Tracks successful completions per role, for resume offsets."""

    def __init__(self, inner, counts: dict):
        self.inner = inner
        self.counts = counts

    def complete(self, request):
        reply = self.inner.complete(request)
        role = request.role_id.value
        self.counts[role] = self.counts.get(role, 0) + 1
        return reply


# --- persistence ------------------------------------------------------------

def _write_atomic(path: Path, text: str):
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def manifest_dict(config, final, iterations, status) -> dict:
    return {
        "config": config.semantic_dict(),
        "final_task": curriculum_to_dict(final),
        "iterations": [record_to_dict(r) for r in iterations],
        "status": status,
    }


def manifest_digest(manifest: dict) -> str:
    return hashlib.sha256(canonical_text(manifest).encode("utf-8")).hexdigest()


def _write_manifest(run_dir: Path, config, final, iterations, status):
    manifest = manifest_dict(config, final, iterations, status)
    payload = {"manifest": manifest, "digest": manifest_digest(manifest)}
    _write_atomic(run_dir / "run.json", canonical_text(payload))


def _write_checkpoint(
    run_dir: Path, config, final, iterations, tree_source, feedback,
    counts, next_curriculum, status,
):
    state = {
        "config": config_to_dict(config),
        "final_task": curriculum_to_dict(final),
        "iterations": [record_to_dict(r) for r in iterations],
        "tree_source": tree_source,
        "feedback": [[source, text] for source, text in feedback.entries],
        "llm_calls": dict(counts),
        "next_curriculum": (
            curriculum_to_dict(next_curriculum) if next_curriculum else None
        ),
        "status": status,
    }
    digest = hashlib.sha256(canonical_text(state).encode("utf-8")).hexdigest()
    _write_atomic(
        run_dir / "checkpoint.json",
        canonical_text({"state": state, "digest": digest}),
    )


def _persist_iteration(run_dir: Path, record: IterationRecord, result: ImproveResult):
    iter_dir = run_dir / f"iter_{record.index:03d}"
    iter_dir.mkdir(parents=True, exist_ok=True)
    _write_atomic(
        iter_dir / "curriculum.json",
        canonical_text(curriculum_to_dict(record.curriculum)),
    )
    strategy = result.attempts[-1].strategy if result.attempts else ""
    _write_atomic(iter_dir / "strategy.txt", strategy + "\n")
    _write_atomic(iter_dir / "code.bt", record.tree_source)
    _write_atomic(iter_dir / "report.json", canonical_text(report_to_dict(record.report)))
    critiques = []
    for attempt in result.attempts:
        if attempt.critique is not None:
            critiques.append(
                f"--- attempt {attempt.index} -> {attempt.critique.target} ---\n"
                f"{attempt.critique.text}"
            )
    _write_atomic(iter_dir / "critiques.txt", "\n\n".join(critiques) + "\n")


# --- the loop ----------------------------------------------------------------

def run(
    final_task: CurriculumSpec,
    config: EngineConfig,
    backend,
    *,
    fmt: CodeFormat | None = None,
    evaluator_factory=None,
    stop_after: int | None = None,
    on_iteration=None,
) -> RunState:
    if not config.run_dir:
        raise OrchestratorError("config.run_dir is not set")
    run_dir = Path(config.run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)

    catalog = resolve_catalog(config)
    fmt = fmt or dsl_format(catalog)
    counts: dict = {}
    stack = _CountingBackend(
        RecordingBackend(backend, run_dir / "transcripts.jsonl"), counts
    )

    first = simplify(final_task, catalog)
    tree = baseline_tree(final_task, catalog)
    feedback = Feedback(cap=config.feedback_cap)
    _write_checkpoint(
        run_dir, config, final_task, [], fmt.render(tree), feedback,
        counts, first, "running",
    )
    return _loop(
        config=config,
        backend=stack,
        catalog=catalog,
        fmt=fmt,
        final=final_task,
        iterations=[],
        tree=tree,
        feedback=feedback,
        current=first,
        counts=counts,
        run_dir=run_dir,
        evaluator_factory=evaluator_factory or arena_evaluator_factory(config, catalog),
        stop_after=stop_after,
        on_iteration=on_iteration,
    )


def resume(
    run_dir,
    backend,
    *,
    fmt: CodeFormat | None = None,
    evaluator_factory=None,
    stop_after: int | None = None,
    on_iteration=None,
) -> RunState:
    run_dir = Path(run_dir)
    path = run_dir / "checkpoint.json"
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
        state = raw["state"]
        recorded = raw["digest"]
    except (OSError, json.JSONDecodeError, KeyError, TypeError) as exc:
        raise CorruptCheckpoint(f"cannot read checkpoint {path}: {exc}") from None
    digest = hashlib.sha256(canonical_text(state).encode("utf-8")).hexdigest()
    if digest != recorded:
        raise CorruptCheckpoint(
            f"checkpoint digest mismatch: content {digest[:12]}, recorded {recorded[:12]}"
        )

    config = config_from_dict(state["config"])
    catalog = resolve_catalog(config)
    fmt = fmt or dsl_format(catalog)
    final = curriculum_from_dict(state["final_task"], catalog)
    iterations = [record_from_dict(r, catalog) for r in state["iterations"]]
    tree, _ = fmt.compile(state["tree_source"])
    feedback = Feedback(
        tuple((s, t) for s, t in state["feedback"]), cap=config.feedback_cap
    )
    counts = {str(k): int(v) for k, v in state["llm_calls"].items()}
    status = state["status"]

    if status in ("success", "failed_at_cap"):
        return RunState(final, tuple(iterations), tree, config, status)
    if state["next_curriculum"] is None:
        raise CorruptCheckpoint("running checkpoint lacks a next curriculum")
    current = curriculum_from_dict(state["next_curriculum"], catalog)

    if hasattr(backend, "cursors"):
        backend.cursors.update(counts)
    stack = _CountingBackend(
        RecordingBackend(backend, run_dir / "transcripts.jsonl"), counts
    )
    return _loop(
        config=config,
        backend=stack,
        catalog=catalog,
        fmt=fmt,
        final=final,
        iterations=iterations,
        tree=tree,
        feedback=feedback,
        current=current,
        counts=counts,
        run_dir=run_dir,
        evaluator_factory=evaluator_factory or arena_evaluator_factory(config, catalog),
        stop_after=stop_after,
        on_iteration=on_iteration,
    )


def _loop(
    *, config, backend, catalog, fmt, final, iterations, tree, feedback,
    current, counts, run_dir, evaluator_factory, stop_after, on_iteration,
) -> RunState:
    designer = Designer(backend, config, catalog)
    coder = Coder(backend, config, catalog, fmt)
    status = "running"
    try:
        while True:
            index = len(iterations)
            result = coder.improve_tree(
                current, tree, feedback, evaluator_factory(index)
            )
            record = IterationRecord(
                index=index,
                curriculum=current,
                tree_source=result.tree_source,
                report=result.report,
                outcome=result.outcome,
                attempts_used=len(result.attempts),
            )
            _persist_iteration(run_dir, record, result)
            iterations.append(record)
            if on_iteration is not None:
                on_iteration(record)
            feedback = result.feedback

            terminal = False
            if result.outcome is Outcome.SUCCESS:
                tree = result.tree
                if spec_equals(current, final):
                    status = "success"
                    terminal = True
            if not terminal and len(iterations) >= config.max_iterations:
                status = "failed_at_cap"
                terminal = True

            next_curriculum = None
            if not terminal:
                next_curriculum = designer.next_curriculum(
                    current, result.report, final, tuple(iterations)
                )
            _write_checkpoint(
                run_dir, config, final, iterations, fmt.render(tree), feedback,
                counts, next_curriculum, status,
            )
            _write_manifest(run_dir, config, final, iterations, status)
            if terminal:
                break
            current = next_curriculum
            if stop_after is not None and len(iterations) >= stop_after:
                return RunState(final, tuple(iterations), tree, config, "running")
    except BackendError:
        # the last end-of-iteration checkpoint already covers resumption
        _write_manifest(run_dir, config, final, iterations, "aborted")
        raise
    return RunState(final, tuple(iterations), tree, config, status)
