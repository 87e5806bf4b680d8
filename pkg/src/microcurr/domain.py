"""Scenario and result value types.

Everything here is an immutable value with a stable JSON form. Win
rates are ``fractions.Fraction`` so a two-of-three result is exactly
two thirds and threshold comparisons never hinge on float noise.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from enum import Enum
from fractions import Fraction
from importlib import resources

from .catalog import UnitCatalog, UnknownUnitType
from .config import EngineConfig
from .dsl import BehaviorTree

# Weight applied to the size of the enemy technology union when scoring
# scenario difficulty. A technology reshapes a fight more than one extra
# unit does, so it counts double.
TECH_DIFFICULTY_WEIGHT = 2.0

MIN_MAP_SIDE = 8

WIN_CONDITION = "eliminate_all_enemies"


class DomainError(Exception):
    """A value violating its own invariants (bad counts, positions, techs)."""


class Outcome(str, Enum):
    SUCCESS = "Success"
    FAILED = "Failed"


@dataclass(frozen=True)
class MapSpec:
    width: int
    height: int
    terrain: str = "flat"


@dataclass(frozen=True)
class ObjectiveSpec:
    tick_limit: int = 1000
    episodes: int = 3
    win_condition: str = WIN_CONDITION


@dataclass(frozen=True)
class UnitSpec:
    unit_type: str
    count: int
    position: tuple[float, float]  # spawn anchor, shared per side
    technologies: frozenset[str] = frozenset()


@dataclass(frozen=True)
class CurriculumSpec:
    id: str
    agents: tuple[UnitSpec, ...]
    enemies: tuple[UnitSpec, ...]
    map: MapSpec
    objective: ObjectiveSpec
    difficulty: float


@dataclass(frozen=True)
class EpisodeMetrics:
    win: bool
    ticks: int
    damage_dealt: float
    damage_taken: float
    surviving_hp_fraction: float
    seed: int


@dataclass(frozen=True)
class PerformanceReport:
    win_rate: Fraction
    episodes: tuple[EpisodeMetrics, ...]
    error: str | None = None


@dataclass(frozen=True)
class IterationRecord:
    index: int
    curriculum: CurriculumSpec
    tree_source: str  # canonical text of the tree this iteration settled on
    report: PerformanceReport
    outcome: Outcome
    attempts_used: int


@dataclass(frozen=True)
class RunState:
    final_task: CurriculumSpec
    iterations: tuple[IterationRecord, ...]
    current_tree: BehaviorTree
    config: EngineConfig
    status: str = "running"  # running | success | failed_at_cap | aborted


# --- difficulty -------------------------------------------------------------

def compute_difficulty(spec: CurriculumSpec, catalog: UnitCatalog) -> float:
    """Enemy count-weight sum plus a tech-union term. Monotone in both."""
    total = 0.0
    techs: set[str] = set()
    for unit in spec.enemies:
        total += unit.count * catalog.weight(unit.unit_type)
        techs |= unit.technologies
    return total + TECH_DIFFICULTY_WEIGHT * len(techs)


# --- normalization and equality ---------------------------------------------

def _normalize_units(units: tuple[UnitSpec, ...]) -> tuple[UnitSpec, ...]:
    return tuple(sorted(units, key=lambda u: (u.unit_type, u.count)))


def normalize_spec(spec: CurriculumSpec) -> CurriculumSpec:
    return replace(
        spec,
        agents=_normalize_units(spec.agents),
        enemies=_normalize_units(spec.enemies),
    )


def spec_equals(a: CurriculumSpec, b: CurriculumSpec) -> bool:
    """Equality on content: ids and cached difficulty do not participate."""
    na, nb = normalize_spec(a), normalize_spec(b)
    return (
        na.agents == nb.agents
        and na.enemies == nb.enemies
        and na.map == nb.map
        and na.objective == nb.objective
    )


# --- construction with invariant checks ---------------------------------------

def _check_units(units, side: str, map_spec: MapSpec, catalog: UnitCatalog):
    if not units:
        raise DomainError(f"{side} side must field at least one unit")
    seen = set()
    for unit in units:
        if unit.unit_type in seen:
            raise DomainError(f"{side} {unit.unit_type}: listed twice")
        seen.add(unit.unit_type)
    for unit in units:
        if unit.count < 1:
            raise DomainError(f"{side} {unit.unit_type}: count must be at least 1")
        stats = catalog.stats(unit.unit_type)  # raises UnknownUnitType
        x, y = unit.position
        if not (0 <= x <= map_spec.width and 0 <= y <= map_spec.height):
            raise DomainError(
                f"{side} {unit.unit_type}: position {unit.position} outside the map"
            )
        for tech in unit.technologies:
            if tech not in stats.techs:
                raise DomainError(
                    f"{side} {unit.unit_type}: technology {tech!r} not applicable"
                )


def make_curriculum(
    id: str,
    agents,
    enemies,
    map: MapSpec,
    objective: ObjectiveSpec,
    catalog: UnitCatalog,
) -> CurriculumSpec:
    """Build a curriculum, recomputing difficulty and checking invariants."""
    if map.width < MIN_MAP_SIDE or map.height < MIN_MAP_SIDE:
        raise DomainError(f"map must be at least {MIN_MAP_SIDE} cells per side")
    if objective.tick_limit < 1:
        raise DomainError("tick limit must be positive")
    if objective.episodes < 1:
        raise DomainError("episode count must be positive")
    if objective.win_condition != WIN_CONDITION:
        raise DomainError(f"unsupported win condition {objective.win_condition!r}")
    agents = _normalize_units(tuple(agents))
    enemies = _normalize_units(tuple(enemies))
    _check_units(agents, "agent", map, catalog)
    _check_units(enemies, "enemy", map, catalog)
    spec = CurriculumSpec(
        id=id, agents=agents, enemies=enemies, map=map, objective=objective,
        difficulty=0.0,
    )
    return replace(spec, difficulty=compute_difficulty(spec, catalog))


# --- rational helpers ---------------------------------------------------------

def encode_rational(value: Fraction) -> str:
    return str(value)


def decode_rational(value, what: str = "win_rate") -> Fraction:
    if isinstance(value, bool):
        raise DomainError(f"{what} must be a rational, got {value!r}")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        try:
            return Fraction(value)
        except (ValueError, ZeroDivisionError):
            raise DomainError(f"{what} is not a rational: {value!r}") from None
    raise DomainError(f"{what} must be an int or 'p/q' string, got {value!r}")


def percent(rate: Fraction) -> int:
    """Whole-number percentage, .5 rounding up: 2/3 renders as 67."""
    return int(rate * 100 + Fraction(1, 2))


# --- composition text ----------------------------------------------------------

def unit_brief(unit: UnitSpec, with_techs: bool) -> str:
    text = f"{unit.unit_type} x{unit.count}"
    if with_techs and unit.technologies:
        text += f"({'+'.join(sorted(unit.technologies))})"
    return text


def side_brief(units: tuple[UnitSpec, ...], with_techs: bool) -> str:
    return ", ".join(unit_brief(u, with_techs) for u in _normalize_units(units))


# --- JSON codecs ----------------------------------------------------------------

def _num(value: float):
    # Collapse integral floats so encodings stay byte-stable.
    if isinstance(value, float) and value == int(value) and abs(value) < 1e15:
        return int(value)
    return value


def canonical_text(payload: dict) -> str:
    return json.dumps(payload, indent=2, ensure_ascii=False) + "\n"


def unit_to_dict(unit: UnitSpec) -> dict:
    return {
        "unit_type": unit.unit_type,
        "count": unit.count,
        "position": [_num(unit.position[0]), _num(unit.position[1])],
        "technologies": sorted(unit.technologies),
    }


def unit_from_dict(raw: dict) -> UnitSpec:
    try:
        position = raw["position"]
        return UnitSpec(
            unit_type=str(raw["unit_type"]),
            count=int(raw["count"]),
            position=(float(position[0]), float(position[1])),
            technologies=frozenset(raw.get("technologies", ())),
        )
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise DomainError(f"bad unit spec {raw!r}: {exc}") from None


def curriculum_to_dict(spec: CurriculumSpec) -> dict:
    spec = normalize_spec(spec)
    return {
        "id": spec.id,
        "agents": [unit_to_dict(u) for u in spec.agents],
        "enemies": [unit_to_dict(u) for u in spec.enemies],
        "map": {
            "width": spec.map.width,
            "height": spec.map.height,
            "terrain": spec.map.terrain,
        },
        "objective": {
            "win_condition": spec.objective.win_condition,
            "tick_limit": spec.objective.tick_limit,
            "episodes": spec.objective.episodes,
        },
        "difficulty": _num(spec.difficulty),
    }


def curriculum_from_dict(raw: dict, catalog: UnitCatalog) -> CurriculumSpec:
    """Decode and re-check a curriculum. Difficulty is always recomputed."""
    if not isinstance(raw, dict):
        raise DomainError("curriculum must be a JSON object")
    try:
        map_raw = raw["map"]
        obj_raw = raw["objective"]
        map_spec = MapSpec(
            width=int(map_raw["width"]),
            height=int(map_raw["height"]),
            terrain=str(map_raw.get("terrain", "flat")),
        )
        objective = ObjectiveSpec(
            tick_limit=int(obj_raw.get("tick_limit", 1000)),
            episodes=int(obj_raw.get("episodes", 3)),
            win_condition=str(obj_raw.get("win_condition", WIN_CONDITION)),
        )
        agents = tuple(unit_from_dict(u) for u in raw["agents"])
        enemies = tuple(unit_from_dict(u) for u in raw["enemies"])
        spec_id = str(raw.get("id", "unnamed"))
    except (KeyError, TypeError, ValueError) as exc:
        raise DomainError(f"bad curriculum: {exc}") from None
    return make_curriculum(spec_id, agents, enemies, map_spec, objective, catalog)


def metrics_to_dict(m: EpisodeMetrics) -> dict:
    return {
        "win": m.win,
        "ticks": m.ticks,
        "damage_dealt": _num(m.damage_dealt),
        "damage_taken": _num(m.damage_taken),
        "surviving_hp_fraction": _num(m.surviving_hp_fraction),
        "seed": m.seed,
    }


def metrics_from_dict(raw: dict) -> EpisodeMetrics:
    try:
        return EpisodeMetrics(
            win=bool(raw["win"]),
            ticks=int(raw["ticks"]),
            damage_dealt=float(raw["damage_dealt"]),
            damage_taken=float(raw["damage_taken"]),
            surviving_hp_fraction=float(raw["surviving_hp_fraction"]),
            seed=int(raw["seed"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise DomainError(f"bad episode metrics: {exc}") from None


def report_to_dict(report: PerformanceReport) -> dict:
    return {
        "win_rate": encode_rational(report.win_rate),
        "episodes": [metrics_to_dict(m) for m in report.episodes],
        "error": report.error,
    }


def report_from_dict(raw: dict) -> PerformanceReport:
    if not isinstance(raw, dict):
        raise DomainError("performance report must be a JSON object")
    error = raw.get("error")
    if error is not None:
        error = str(error)
    return PerformanceReport(
        win_rate=decode_rational(raw.get("win_rate", 0)),
        episodes=tuple(metrics_from_dict(m) for m in raw.get("episodes", ())),
        error=error,
    )


def record_to_dict(record: IterationRecord) -> dict:
    return {
        "index": record.index,
        "curriculum": curriculum_to_dict(record.curriculum),
        "tree_source": record.tree_source,
        "report": report_to_dict(record.report),
        "outcome": record.outcome.value,
        "attempts_used": record.attempts_used,
    }


def record_from_dict(raw: dict, catalog: UnitCatalog) -> IterationRecord:
    try:
        return IterationRecord(
            index=int(raw["index"]),
            curriculum=curriculum_from_dict(raw["curriculum"], catalog),
            tree_source=str(raw["tree_source"]),
            report=report_from_dict(raw["report"]),
            outcome=Outcome(raw["outcome"]),
            attempts_used=int(raw["attempts_used"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise DomainError(f"bad iteration record: {exc}") from None


def stock_final_task(catalog: UnitCatalog) -> CurriculumSpec:
    """The bundled target scenario used by the examples and fixtures."""
    text = resources.files("microcurr.data").joinpath("final_task.json").read_text(
        encoding="utf-8"
    )
    return curriculum_from_dict(json.loads(text), catalog)
