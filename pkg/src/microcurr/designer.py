"""Curriculum designer: threshold gate, task simplification, candidate
validation, and the retry-then-fallback loop around the designer LLM."""

from __future__ import annotations

import json
from dataclasses import dataclass

from .catalog import UnitCatalog
from .config import EngineConfig
from .domain import (
    WIN_CONDITION,
    CurriculumSpec,
    DomainError,
    IterationRecord,
    MapSpec,
    ObjectiveSpec,
    Outcome,
    PerformanceReport,
    UnitSpec,
    canonical_text,
    curriculum_to_dict,
    make_curriculum,
    normalize_spec,
    percent,
    side_brief,
    spec_equals,
)
from .llm import BackendError, ChatRequest, Role, extract_fenced_block
from .prompting import catalog_rows, curriculum_types, load_template, map_summary

AGENT_SIMPLIFY_CAP = 5
ENEMY_SIMPLIFY_CAP = 2

INCREASE = "Increase"
ADJUST = "Adjust"

DESIGNER_SYSTEM = (
    "You are the curriculum designer for a squad-combat training loop. "
    "You output task specifications as JSON and nothing else."
)

SCHEMA_INSTRUCTIONS = """Reply with exactly one fenced JSON object of this shape:
{
  "id": "short-task-name",
  "agents": [{"unit_type": "...", "count": 1, "position": [x, y], "technologies": []}],
  "enemies": [{"unit_type": "...", "count": 1, "position": [x, y], "technologies": []}],
  "map": {"width": W, "height": H, "terrain": "flat"},
  "objective": {"win_condition": "eliminate_all_enemies", "tick_limit": T, "episodes": E}
}
Unit types must come from the final task, counts must not exceed it, and each
type's technologies must be a subset of what the final task grants that type.
The map must equal the final task's map."""


class EmptyCurriculum(DomainError):
    """Clamping removed every unit on one side."""


def gate(win_rate, theta) -> str:
    """Increase when the squad met the threshold, Adjust otherwise.

    Exact rational comparison; 2/3 passes a 2/3 threshold.
    """
    return INCREASE if win_rate >= theta else ADJUST


def _dominant(units: tuple[UnitSpec, ...]) -> UnitSpec:
    # highest count wins; ties break toward the alphabetically first type
    return sorted(units, key=lambda u: (-u.count, u.unit_type))[0]


def simplify(final: CurriculumSpec, catalog: UnitCatalog) -> CurriculumSpec:
    """Deterministic starter task: the most numerous unit type on each side,
    agents capped at 5 with no technologies, enemies capped at 2 keeping
    theirs. Map and objective carry over."""
    final = normalize_spec(final)
    agent = _dominant(final.agents)
    enemy = _dominant(final.enemies)
    agents = (
        UnitSpec(
            unit_type=agent.unit_type,
            count=min(agent.count, AGENT_SIMPLIFY_CAP),
            position=agent.position,
            technologies=frozenset(),
        ),
    )
    enemies = (
        UnitSpec(
            unit_type=enemy.unit_type,
            count=min(enemy.count, ENEMY_SIMPLIFY_CAP),
            position=enemy.position,
            technologies=enemy.technologies,
        ),
    )
    return make_curriculum(
        f"{final.id}-simplified", agents, enemies, final.map, final.objective, catalog
    )


def validate_curriculum(
    candidate: CurriculumSpec, final: CurriculumSpec, catalog: UnitCatalog
) -> CurriculumSpec:
    """Clamp a candidate into the space dominated by the final task.

    Unknown types are dropped, counts cap at the final's, technologies
    intersect with the final's per type, the map is forced to the final's,
    and nonpositive counts vanish. A clamped candidate that equals the
    final task returns the final task object itself.
    """
    final = normalize_spec(final)

    def clamp_side(units, final_units):
        final_by_type = {u.unit_type: u for u in final_units}
        merged: dict[str, dict] = {}
        for unit in units:
            ref = final_by_type.get(unit.unit_type)
            if ref is None:
                continue
            slot = merged.setdefault(
                unit.unit_type,
                {"count": 0, "position": unit.position, "techs": frozenset()},
            )
            slot["count"] += unit.count
            slot["techs"] |= frozenset(unit.technologies) & ref.technologies
        out = []
        for unit_type in sorted(merged):
            slot = merged[unit_type]
            count = min(slot["count"], final_by_type[unit_type].count)
            if count < 1:
                continue
            out.append(UnitSpec(unit_type, count, slot["position"], slot["techs"]))
        return tuple(out)

    agents = clamp_side(candidate.agents, final.agents)
    enemies = clamp_side(candidate.enemies, final.enemies)
    if not agents:
        raise EmptyCurriculum("clamping removed every agent unit")
    if not enemies:
        raise EmptyCurriculum("clamping removed every enemy unit")
    clamped = make_curriculum(
        candidate.id, agents, enemies, final.map, candidate.objective, catalog
    )
    if spec_equals(clamped, final):
        return final
    return clamped


def format_history(iterations, window: int) -> str:
    """Last `window` iteration summaries, oldest first, one line each."""
    lines = []
    for rec in list(iterations)[-window:]:
        agents = side_brief(rec.curriculum.agents, with_techs=False)
        enemies = side_brief(rec.curriculum.enemies, with_techs=True)
        lines.append(
            f"#{rec.index} [{rec.outcome.value}] agents={{{agents}}} "
            f"enemies={{{enemies}}} win_rate={percent(rec.report.win_rate)}%"
        )
    return "\n".join(lines)


def report_brief(report: PerformanceReport) -> str:
    head = f"win_rate={percent(report.win_rate)}%"
    if report.error:
        return f"{head} error: {report.error}"
    if not report.episodes:
        return head
    episodes = "; ".join(
        f"seed {m.seed}: {'win' if m.win else 'loss'} in {m.ticks} ticks"
        for m in report.episodes
    )
    return f"{head} ({episodes})"


def render_environment(final: CurriculumSpec, catalog: UnitCatalog) -> str:
    objective = final.objective
    return "\n".join(
        [
            f"Map: {map_summary(final.map)}",
            f"Win condition: destroy every enemy unit within "
            f"{objective.tick_limit} ticks; win rate is measured over "
            f"{objective.episodes} episodes.",
            f"Final agents: {side_brief(final.agents, with_techs=True)}",
            f"Final enemies: {side_brief(final.enemies, with_techs=True)}",
            "Unit capabilities:",
            catalog_rows(curriculum_types(final), catalog),
        ]
    )


# --- lenient reply decoding --------------------------------------------------
# The LLM's JSON is decoded without count/type checks so that
# validate_curriculum gets to apply its drop-and-clamp rules; strictness
# comes back at the end via make_curriculum.

def _decode_units(raw_units, final_units, side: str) -> tuple[UnitSpec, ...]:
    if not isinstance(raw_units, list):
        raise DomainError(f"candidate {side} must be a list")
    anchors = {u.unit_type: u.position for u in final_units}
    default_anchor = final_units[0].position
    out = []
    for item in raw_units:
        unit_type = str(item["unit_type"])
        count = int(item["count"])
        pos = item.get("position")
        if pos is None:
            position = anchors.get(unit_type, default_anchor)
        else:
            x, y = pos
            position = (float(x), float(y))
        techs = frozenset(str(t) for t in item.get("technologies", ()))
        out.append(UnitSpec(unit_type, count, position, techs))
    return tuple(out)


def decode_candidate(raw, final: CurriculumSpec) -> CurriculumSpec:
    if not isinstance(raw, dict):
        raise DomainError("candidate must be a JSON object")
    final = normalize_spec(final)
    try:
        agents = _decode_units(raw["agents"], final.agents, "agents")
        enemies = _decode_units(raw["enemies"], final.enemies, "enemies")
        if "map" in raw:
            map_spec = MapSpec(
                width=int(raw["map"]["width"]),
                height=int(raw["map"]["height"]),
                terrain=str(raw["map"].get("terrain", "flat")),
            )
        else:
            map_spec = final.map
        if "objective" in raw:
            obj = raw["objective"]
            objective = ObjectiveSpec(
                tick_limit=int(obj["tick_limit"]),
                episodes=int(obj.get("episodes", final.objective.episodes)),
                win_condition=str(obj.get("win_condition", WIN_CONDITION)),
            )
        else:
            objective = final.objective
    except (KeyError, TypeError, ValueError) as exc:
        raise DomainError(f"bad candidate: {exc}") from None
    return CurriculumSpec(
        id=str(raw.get("id", "candidate")),
        agents=agents,
        enemies=enemies,
        map=map_spec,
        objective=objective,
        difficulty=0.0,
    )


# --- deterministic fallbacks --------------------------------------------------

def _ceil_mul_3_2(count: int) -> int:
    return -(-3 * count // 2)


def fallback_increase(current: CurriculumSpec, final: CurriculumSpec) -> CurriculumSpec:
    """Every count times 1.5 rounded up (clamp happens in validation), plus
    the first missing enemy type from the final task at count 1."""
    final = normalize_spec(final)
    agents = tuple(
        UnitSpec(u.unit_type, _ceil_mul_3_2(u.count), u.position, u.technologies)
        for u in current.agents
    )
    enemies = [
        UnitSpec(u.unit_type, _ceil_mul_3_2(u.count), u.position, u.technologies)
        for u in current.enemies
    ]
    have = {u.unit_type for u in enemies}
    missing = sorted(u.unit_type for u in final.enemies if u.unit_type not in have)
    if missing:
        ref = next(u for u in final.enemies if u.unit_type == missing[0])
        enemies.append(UnitSpec(ref.unit_type, 1, ref.position, ref.technologies))
    return CurriculumSpec(
        id=f"{current.id}+",
        agents=agents,
        enemies=tuple(enemies),
        map=final.map,
        objective=current.objective,
        difficulty=0.0,
    )


def fallback_adjust(
    anchor: CurriculumSpec, final: CurriculumSpec
) -> CurriculumSpec | None:
    """The anchor (last mastered task) minus one unit of its dominant enemy
    type. None when that would empty the enemy side."""
    enemies = []
    dropped = False
    dominant = _dominant(anchor.enemies)
    for unit in anchor.enemies:
        if not dropped and unit.unit_type == dominant.unit_type:
            dropped = True
            if unit.count > 1:
                enemies.append(
                    UnitSpec(unit.unit_type, unit.count - 1, unit.position, unit.technologies)
                )
        else:
            enemies.append(unit)
    if not enemies:
        return None
    return CurriculumSpec(
        id=f"{anchor.id}-",
        agents=anchor.agents,
        enemies=tuple(enemies),
        map=final.map,
        objective=anchor.objective,
        difficulty=0.0,
    )


def last_success_curriculum(history) -> CurriculumSpec | None:
    for rec in reversed(list(history)):
        if rec.outcome is Outcome.SUCCESS:
            return rec.curriculum
    return None


# --- the designer proper --------------------------------------------------------

@dataclass
class Designer:
    backend: object
    config: EngineConfig
    catalog: UnitCatalog

    def next_curriculum(
        self,
        current: CurriculumSpec,
        report: PerformanceReport,
        final: CurriculumSpec,
        history: tuple[IterationRecord, ...],
    ) -> CurriculumSpec:
        directive = gate(report.win_rate, self.config.theta)
        body = self._render_body(directive, current, report, final, history)
        request = ChatRequest(
            role_id=Role.DESIGNER,
            messages=(("system", DESIGNER_SYSTEM), ("user", body)),
            temperature=self.config.backend.temperatures[Role.DESIGNER.value],
            max_tokens=self.config.backend.max_tokens,
        )
        for _ in range(self.config.designer_retries):
            try:
                reply = self.backend.complete(request)
            except BackendError as exc:
                if exc.kind == "MalformedReply":
                    continue
                raise
            try:
                raw = json.loads(extract_fenced_block(reply))
                candidate = decode_candidate(raw, final)
                validated = validate_curriculum(candidate, final, self.catalog)
            except (json.JSONDecodeError, DomainError):
                continue
            if directive == ADJUST and validated.difficulty >= current.difficulty:
                continue  # an adjustment must actually get easier
            return validated
        return self._fallback(directive, current, final, history)

    def _fallback(self, directive, current, final, history) -> CurriculumSpec:
        if directive == INCREASE:
            candidate = fallback_increase(current, final)
        else:
            anchor = last_success_curriculum(history) or simplify(final, self.catalog)
            candidate = fallback_adjust(anchor, final)
            if candidate is None:
                return simplify(final, self.catalog)
        try:
            return validate_curriculum(candidate, final, self.catalog)
        except DomainError:
            return simplify(final, self.catalog)

    def _render_body(self, directive, current, report, final, history) -> str:
        template = load_template("designer.txt", self.config.prompt_dir)
        history_lines = format_history(history, self.config.history_window).split("\n")
        budget = self.config.prompt_budget

        def render(lines) -> str:
            return template.substitute(
                directive=directive,
                environment=render_environment(final, self.catalog),
                current=canonical_text(curriculum_to_dict(current)),
                feedback=report_brief(report),
                history="\n".join(lines) or "none",
                schema=SCHEMA_INSTRUCTIONS,
            )

        body = render(history_lines)
        while len(body) > budget and any(history_lines):
            history_lines = history_lines[1:]  # oldest first, so trim the front
            body = render(history_lines)
        return body
