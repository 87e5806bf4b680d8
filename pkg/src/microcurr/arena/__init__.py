"""Deterministic micro-combat simulator."""

from .episode import (
    EpisodeResult,
    SPAWN_JITTER_RADIUS,
    Splitmix64,
    evaluate,
    run_episode,
    spawn_state,
    trace_line,
)
from .opponent import opponent_orders
from .sim import (
    AGENT,
    DETECTION_RANGE,
    ENEMY,
    Hazard,
    LiveUnit,
    Order,
    SimState,
    ability_ready,
    agent_orders,
    can_hit,
    eff_cooldown,
    eff_damage,
    eff_range,
    eff_speed,
    step,
)

__all__ = [
    "AGENT", "DETECTION_RANGE", "ENEMY", "EpisodeResult", "Hazard",
    "LiveUnit", "Order", "SPAWN_JITTER_RADIUS", "SimState", "Splitmix64",
    "ability_ready", "agent_orders", "can_hit", "eff_cooldown", "eff_damage",
    "eff_range", "eff_speed", "evaluate", "opponent_orders", "run_episode",
    "spawn_state", "step", "trace_line",
]
