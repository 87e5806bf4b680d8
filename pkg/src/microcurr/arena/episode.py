"""Episode runner: seeded spawn, tick loop, win judgment, evaluation.

The spawn jitter is the single source of randomness, drawn from a
splitmix64 stream so episode traces are reproducible independently of
Python's own RNG. NEVER swap in random.Random here without freezing
every recorded fixture; the golden run outputs encode these streams.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction

from ..catalog import CatalogError, UnitCatalog
from ..domain import CurriculumSpec, EpisodeMetrics, PerformanceReport, normalize_spec
from ..dsl import BehaviorTree
from ..hashing import Fnv64
from .opponent import opponent_orders
from .sim import AGENT, ENEMY, LiveUnit, SimState, step

SPAWN_JITTER_RADIUS = 2.0


class Splitmix64:
    """Tiny deterministic generator; state advances by a fixed constant."""

    def __init__(self, seed: int):
        self.state = seed & 0xFFFFFFFFFFFFFFFF

    def next_u64(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & 0xFFFFFFFFFFFFFFFF
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & 0xFFFFFFFFFFFFFFFF
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & 0xFFFFFFFFFFFFFFFF
        return z ^ (z >> 31)

    def next_float(self) -> float:
        return (self.next_u64() >> 11) / float(1 << 53)


def spawn_state(spec: CurriculumSpec, catalog: UnitCatalog, seed: int) -> SimState:
    """Expand unit specs into live units around their side anchors."""
    spec = normalize_spec(spec)
    rng = Splitmix64(seed)
    units: list[LiveUnit] = []
    uid = 0
    for side, roster in ((AGENT, spec.agents), (ENEMY, spec.enemies)):
        for unit_spec in roster:
            stats = catalog.stats(unit_spec.unit_type)
            ax, ay = unit_spec.position
            for _ in range(unit_spec.count):
                radius = SPAWN_JITTER_RADIUS * math.sqrt(rng.next_float())
                angle = 2 * math.pi * rng.next_float()
                x = min(max(ax + radius * math.cos(angle), 0.0), float(spec.map.width))
                y = min(max(ay + radius * math.sin(angle), 0.0), float(spec.map.height))
                units.append(LiveUnit(
                    uid=uid, side=side, unit_type=unit_spec.unit_type,
                    x=x, y=y, hp=stats.max_hp, shield=stats.max_shield,
                    techs=unit_spec.technologies,
                ))
                uid += 1
    return SimState(
        tick=0, units=units, hazards=[],
        map_w=float(spec.map.width), map_h=float(spec.map.height), seed=seed,
    )


def trace_line(state: SimState) -> str:
    payload = {
        "tick": state.tick,
        "units": [
            [u.uid, u.side, u.unit_type, u.x, u.y, u.hp, u.shield,
             u.cooldown, u.stim_ticks, u.charge_ticks, u.cloak_ticks,
             int(u.sieged), u.transform_ticks, int(u.alive)]
            for u in state.units
        ],
        "hazards": [
            [hz.kind, hz.x, hz.y, hz.radius, hz.damage,
             hz.ticks_remaining, hz.delay]
            for hz in state.hazards
        ],
    }
    return json.dumps(payload, separators=(",", ":"))


@dataclass(frozen=True)
class EpisodeResult:
    metrics: EpisodeMetrics
    trace_digest: str  # 16 hex chars over the per-tick trace stream


def run_episode(
    spec: CurriculumSpec,
    tree: BehaviorTree,
    seed: int,
    catalog: UnitCatalog,
    trace=None,
) -> EpisodeResult:
    """One full episode. ``trace`` receives each post-tick line when given."""
    state = spawn_state(spec, catalog, seed)
    digest = Fnv64()
    tick_limit = spec.objective.tick_limit
    total_pool = sum(
        (catalog.stats(u.unit_type).max_hp + catalog.stats(u.unit_type).max_shield)
        for u in state.units if u.side == AGENT
    )
    while state.tick < tick_limit:
        if not state.alive_on(AGENT) or not state.alive_on(ENEMY):
            break
        step(state, tree, opponent_orders, catalog)
        line = trace_line(state)
        digest.update(line)
        digest.update("\n")
        if trace is not None:
            trace(line)

    agents_alive = state.alive_on(AGENT)
    win = not state.alive_on(ENEMY) and bool(agents_alive)
    surviving = sum(u.vitals for u in agents_alive) / total_pool if total_pool else 0.0
    metrics = EpisodeMetrics(
        win=win,
        ticks=state.tick,
        damage_dealt=state.accounting["dealt_by_agent"],
        damage_taken=state.accounting["raw_to_agent"],
        surviving_hp_fraction=surviving,
        seed=seed,
    )
    digest.update(json.dumps(
        {"win": win, "ticks": state.tick, "seed": seed}, separators=(",", ":")
    ))
    return EpisodeResult(metrics=metrics, trace_digest=digest.hexdigest())


def evaluate(
    spec: CurriculumSpec,
    tree: BehaviorTree,
    base_seed: int,
    catalog: UnitCatalog,
    episodes: int | None = None,
    workers: int = 1,
) -> PerformanceReport:
    """Fixed seed ladder base_seed..base_seed+n-1, merged in seed order."""
    n = episodes if episodes is not None else spec.objective.episodes
    seeds = [base_seed + i for i in range(n)]
    try:
        if workers > 1 and n > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(
                    lambda s: run_episode(spec, tree, s, catalog), seeds
                ))
        else:
            results = [run_episode(spec, tree, s, catalog) for s in seeds]
    except CatalogError as exc:
        return PerformanceReport(win_rate=Fraction(0), episodes=(), error=str(exc))
    results.sort(key=lambda r: r.metrics.seed)
    wins = sum(1 for r in results if r.metrics.win)
    return PerformanceReport(
        win_rate=Fraction(wins, n),
        episodes=tuple(r.metrics for r in results),
    )
