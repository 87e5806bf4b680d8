"""Built-in enemy controller.

One fixed doctrine, no randomness: focus the weakest reachable target,
otherwise close distance. Casters get one special-case rule each, with
ties always broken by lowest unit id so replays cannot diverge.
"""

from __future__ import annotations

from ..catalog import UnitCatalog
from .sim import (
    AGENT,
    ENEMY,
    LiveUnit,
    Order,
    IDLE,
    SimState,
    _revealed,
    ability_ready,
    can_hit,
    dist,
    dist_to,
    eff_range,
    has_weapon,
    visible_opponents,
    _lowest_vitals,
    _nearest,
    _point_away,
)

# A disruptor with nothing to throw keeps this much ground between
# itself and the front line.
_DISRUPTOR_STANDOFF = 7.0


def _densest_cluster(
    targets: list[LiveUnit], radius: float, minimum: int
) -> tuple[float, float] | None:
    """Position of the target whose surroundings pack the most targets.

    Cluster size counts the center unit itself. Returns None when no
    cluster reaches ``minimum``.
    """
    best_pos = None
    best_key = None
    for center in targets:
        size = sum(
            1 for t in targets if dist_to(t, center.x, center.y) <= radius
        )
        if size < minimum:
            continue
        key = (-size, center.uid)
        if best_key is None or key < best_key:
            best_key = key
            best_pos = (center.x, center.y)
    return best_pos


def _basic(unit: LiveUnit, targets: list[LiveUnit], catalog: UnitCatalog) -> Order:
    stats = catalog.stats(unit.unit_type)
    reachable = [t for t in targets if can_hit(stats, catalog.stats(t.unit_type))]
    if has_weapon(unit, stats) and reachable:
        in_range = [
            t for t in reachable if dist(unit, t) <= eff_range(unit, stats, catalog)
        ]
        if in_range:
            if unit.cooldown <= 0:
                victim = _lowest_vitals(in_range)
                return Order("fire", target_uid=victim.uid)
            return IDLE
    pool = reachable or targets
    near = _nearest(pool, unit)
    if near is None or stats.speed <= 0:
        return IDLE
    return Order("move", point=(near.x, near.y))


def opponent_orders(state: SimState, catalog: UnitCatalog) -> dict[int, Order]:
    revealed = _revealed(state, ENEMY, catalog)
    orders: dict[int, Order] = {}
    for unit in state.alive_on(ENEMY):
        targets = visible_opponents(state, unit, catalog, revealed)
        if not targets:
            orders[unit.uid] = IDLE
            continue
        orders[unit.uid] = _decide(state, unit, targets, catalog)
    return orders


def _decide(
    state: SimState, unit: LiveUnit, targets: list[LiveUnit], catalog: UnitCatalog
) -> Order:
    stats = catalog.stats(unit.unit_type)

    if "PsiStormTech" in unit.techs and ability_ready(unit, "PsiStormTech", catalog):
        storm = catalog.ability("PsiStormTech")
        pos = _densest_cluster(targets, float(storm["radius"]), minimum=3)
        if pos is not None:
            if dist_to(unit, pos[0], pos[1]) <= float(storm["cast_range"]):
                return Order("cast", tech="PsiStormTech", point=pos)
            if stats.speed > 0:
                return Order("move", point=pos)

    if "BlinkTech" in unit.techs and ability_ready(unit, "BlinkTech", catalog):
        blink = catalog.ability("BlinkTech")
        if stats.max_hp > 0 and unit.hp / stats.max_hp < float(blink["trigger_hp_fraction"]):
            near = _nearest(targets, unit)
            if near is not None:
                dest = _point_away(unit, near, float(blink["distance"]))
                return Order("blink", tech="BlinkTech", point=dest)

    if unit.unit_type == "Disruptor" and catalog.has_ability("Nova"):
        nova = catalog.ability("Nova")
        if unit.ability_cd.get("Nova", 0) <= 0:
            pos = _densest_cluster(targets, float(nova["radius"]), minimum=2)
            if pos is not None:
                if dist_to(unit, pos[0], pos[1]) <= float(nova["cast_range"]):
                    order = Order("cast", tech="Nova", point=pos)
                    # Nova is innate, not a granted technology, so the
                    # readiness gate above cannot use ability_ready.
                    return order
                if stats.speed > 0:
                    return Order("move", point=pos)
        near = _nearest(targets, unit)
        if near is not None and dist(unit, near) > _DISRUPTOR_STANDOFF and stats.speed > 0:
            return Order("move", point=(near.x, near.y))
        return IDLE

    return _basic(unit, targets, catalog)
