"""Fixed-timestep combat state and the per-tick resolution rules.

Every tick resolves in one fixed order: decisions are taken against the
tick-start snapshot, then casts, movement, attacks, hazard damage,
heals, status expiry, and finally death marking. Units that die during
a tick still get their queued shot off, so mutual kills are possible.
No randomness lives here; the only seeded draw happens at spawn time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from ..catalog import UnitCatalog, UnitStats
from .. import dsl

# Cloaked units are revealed to a side while one of its detectors is
# within this range, independent of the detector's sight.
DETECTION_RANGE = 11.0

AGENT = "agent"
ENEMY = "enemy"


@dataclass
class LiveUnit:
    uid: int
    side: str
    unit_type: str
    x: float
    y: float
    hp: float
    shield: float
    techs: frozenset[str]
    cooldown: float = 0.0          # attack cooldown remaining
    alive: bool = True
    stim_ticks: int = 0
    charge_ticks: int = 0
    cloak_ticks: int = 0
    sieged: bool = False
    transform_ticks: int = 0
    ability_cd: dict = field(default_factory=dict)

    @property
    def cloaked(self) -> bool:
        return self.cloak_ticks > 0

    @property
    def vitals(self) -> float:
        return self.hp + self.shield


@dataclass
class Hazard:
    kind: str            # "storm" ticks for a duration, "nova" bursts once
    x: float
    y: float
    radius: float
    damage: float        # per tick (storm) or per burst (nova)
    ticks_remaining: int
    delay: int           # travel ticks before a nova lands
    source_side: str


@dataclass
class Order:
    kind: str                      # fire | move | cast | blink | heal | idle
    target_uid: int | None = None
    point: tuple[float, float] | None = None
    tech: str | None = None


IDLE = Order("idle")


@dataclass
class SimState:
    tick: int
    units: list[LiveUnit]
    hazards: list[Hazard]
    map_w: float
    map_h: float
    seed: int
    accounting: dict = field(
        default_factory=lambda: {
            "raw_to_agent": 0.0, "raw_to_enemy": 0.0,
            "applied_to_agent": 0.0, "applied_to_enemy": 0.0,
            "dealt_by_agent": 0.0, "dealt_by_enemy": 0.0,
        }
    )

    def alive_on(self, side: str) -> list[LiveUnit]:
        return [u for u in self.units if u.alive and u.side == side]


def dist(a: LiveUnit, b: LiveUnit) -> float:
    return math.hypot(a.x - b.x, a.y - b.y)


def dist_to(u: LiveUnit, x: float, y: float) -> float:
    return math.hypot(u.x - x, u.y - y)


# --- derived combat stats ----------------------------------------------------


def eff_range(u: LiveUnit, stats: UnitStats, catalog: UnitCatalog) -> float:
    if u.sieged and "SiegeTech" in u.techs:
        return float(catalog.ability("SiegeTech")["range"])
    r = stats.range
    if "ExtendedThermalLance" in u.techs:
        r += float(catalog.ability("ExtendedThermalLance")["range_bonus"])
    return r


def eff_damage(u: LiveUnit, stats: UnitStats, catalog: UnitCatalog) -> float:
    if u.sieged and "SiegeTech" in u.techs:
        return float(catalog.ability("SiegeTech")["damage"])
    d = stats.damage
    if "PunisherGrenades" in u.techs:
        d += float(catalog.ability("PunisherGrenades")["damage_bonus"])
    return d


def eff_cooldown(u: LiveUnit, stats: UnitStats, catalog: UnitCatalog) -> float:
    if u.sieged and "SiegeTech" in u.techs:
        base = float(catalog.ability("SiegeTech")["weapon_cooldown"])
    else:
        base = stats.cooldown
    if u.stim_ticks > 0 and "Stimpack" in u.techs:
        base *= float(catalog.ability("Stimpack")["cooldown_multiplier"])
    return base


def eff_speed(u: LiveUnit, stats: UnitStats, catalog: UnitCatalog) -> float:
    if u.sieged or u.transform_ticks > 0:
        return 0.0
    s = stats.speed
    if u.charge_ticks > 0 and "Charge" in u.techs:
        s *= float(catalog.ability("Charge")["speed_multiplier"])
    return s


def has_weapon(u: LiveUnit, stats: UnitStats) -> bool:
    if u.sieged and "SiegeTech" in u.techs:
        return True
    return stats.has_weapon


def splash_radius(u: LiveUnit, stats: UnitStats, catalog: UnitCatalog) -> float:
    if u.sieged and "SiegeTech" in u.techs:
        return float(catalog.ability("SiegeTech")["splash"])
    return stats.splash_radius


def can_hit(attacker: UnitStats, target: UnitStats) -> bool:
    """Air and ground targeting. Melee reaches ground only; a unit the
    catalog counts as air is reachable by anti-air weapons too."""
    air = target.flying or target.counts_as_air
    if attacker.anti_air_only:
        return air
    if air and not target.counts_as_air:
        return attacker.range >= 2.0
    return True


# --- visibility ----------------------------------------------------------------


def _revealed(state: SimState, observer_side: str, catalog: UnitCatalog) -> set[int]:
    """Uids of cloaked opponents a detector of observer_side uncovers."""
    other = ENEMY if observer_side == AGENT else AGENT
    cloaked = [u for u in state.alive_on(other) if u.cloaked]
    if not cloaked:
        return set()
    detectors = [
        u for u in state.alive_on(observer_side)
        if catalog.stats(u.unit_type).detector
    ]
    out: set[int] = set()
    for unit in cloaked:
        for det in detectors:
            if dist(det, unit) <= DETECTION_RANGE:
                out.add(unit.uid)
                break
    return out


def visible_opponents(
    state: SimState, unit: LiveUnit, catalog: UnitCatalog, revealed: set[int]
) -> list[LiveUnit]:
    other = ENEMY if unit.side == AGENT else AGENT
    sight = catalog.stats(unit.unit_type).sight
    out = []
    for cand in state.units:
        if not cand.alive or cand.side != other:
            continue
        if cand.cloaked and cand.uid not in revealed:
            continue
        if dist(unit, cand) <= sight:
            out.append(cand)
    return out


# --- policy evaluation -----------------------------------------------------------

DEFAULT_ROOT: dsl.Node = dsl.Attack(dsl.NearestEnemy())


def _nearest(units: list[LiveUnit], to: LiveUnit) -> LiveUnit | None:
    best = None
    best_key = None
    for u in units:
        key = (dist(u, to), u.uid)
        if best_key is None or key < best_key:
            best, best_key = u, key
    return best


def _lowest_vitals(units: list[LiveUnit]) -> LiveUnit | None:
    best = None
    best_key = None
    for u in units:
        key = (u.vitals, u.uid)
        if best_key is None or key < best_key:
            best, best_key = u, key
    return best


def _in_any_hazard(state: SimState, u: LiveUnit) -> bool:
    for hz in state.hazards:
        if dist_to(u, hz.x, hz.y) <= hz.radius:
            return True
    return False


def ability_ready(u: LiveUnit, tech: str, catalog: UnitCatalog) -> bool:
    if tech not in u.techs or not catalog.has_ability(tech):
        return False
    if u.ability_cd.get(tech, 0) > 0:
        return False
    spec = catalog.ability(tech)
    kind = spec["kind"]
    if kind == "stim":
        return u.hp > float(spec["hp_cost"])
    if kind == "cloak":
        return u.cloak_ticks == 0
    if kind == "siege":
        return u.transform_ticks == 0
    if kind == "charge":
        return u.charge_ticks == 0
    if kind in ("storm", "nova", "blink"):
        return True
    return False  # passives are never castable


class _PolicyCtx:
    """Everything one unit's tree evaluation can observe this tick."""

    __slots__ = ("state", "unit", "stats", "catalog", "enemies", "allies")

    def __init__(self, state, unit, catalog, revealed):
        self.state = state
        self.unit = unit
        self.catalog = catalog
        self.stats = catalog.stats(unit.unit_type)
        self.enemies = visible_opponents(state, unit, catalog, revealed)
        self.allies = [
            u for u in state.alive_on(unit.side) if u.uid != unit.uid
        ]

    def eval_cond(self, cond: dsl.Cond) -> bool:
        u = self.unit
        if isinstance(cond, dsl.EnemyInRange):
            return any(dist(u, e) <= cond.radius for e in self.enemies)
        if isinstance(cond, dsl.HpFracBelow):
            max_hp = self.stats.max_hp
            return max_hp > 0 and u.hp / max_hp < cond.fraction
        if isinstance(cond, dsl.ShieldDepleted):
            return u.shield <= 0
        if isinstance(cond, dsl.AbilityReady):
            return ability_ready(u, cond.tech, self.catalog)
        if isinstance(cond, dsl.EnemyCountOfAtLeast):
            hits = sum(1 for e in self.enemies if e.unit_type == cond.unit_type)
            return hits >= cond.count
        if isinstance(cond, dsl.AllyInjuredWithin):
            return any(
                a.hp < self.catalog.stats(a.unit_type).max_hp
                and dist(u, a) <= cond.radius
                for a in self.allies
            )
        if isinstance(cond, dsl.DistanceToNearestEnemyAbove):
            near = _nearest(self.enemies, u)
            return near is None or dist(u, near) > cond.distance
        if isinstance(cond, dsl.InAoeHazard):
            return _in_any_hazard(self.state, u)
        if isinstance(cond, dsl.And):
            return all(self.eval_cond(c) for c in cond.items)
        if isinstance(cond, dsl.Or):
            return any(self.eval_cond(c) for c in cond.items)
        if isinstance(cond, dsl.Not):
            return not self.eval_cond(cond.item)
        raise TypeError(f"unknown condition {cond!r}")

    def select_unit(self, sel: dsl.Selector) -> LiveUnit | None:
        if isinstance(sel, dsl.NearestEnemy):
            return _nearest(self.enemies, self.unit)
        if isinstance(sel, dsl.LowestHpEnemy):
            return _lowest_vitals(self.enemies)
        if isinstance(sel, dsl.NearestEnemyOfType):
            pool = [e for e in self.enemies if e.unit_type == sel.unit_type]
            return _nearest(pool, self.unit)
        if isinstance(sel, dsl.NearestInjuredAlly):
            pool = [
                a for a in self.allies
                if a.hp < self.catalog.stats(a.unit_type).max_hp
            ]
            return _nearest(pool, self.unit)
        return None

    def select_point(self, sel: dsl.Selector) -> tuple[float, float] | None:
        if isinstance(sel, dsl.Point):
            return (sel.x, sel.y)
        if isinstance(sel, dsl.EnemyCentroid):
            if not self.enemies:
                return None
            cx = sum(e.x for e in self.enemies) / len(self.enemies)
            cy = sum(e.y for e in self.enemies) / len(self.enemies)
            return (cx, cy)
        target = self.select_unit(sel)
        if target is None:
            return None
        return (target.x, target.y)

    # --- actions ---

    def to_order(self, node: dsl.Node) -> Order:
        while isinstance(node, dsl.Decision):
            node = node.then if self.eval_cond(node.condition) else node.otherwise
        return self._action_order(node)

    def _action_order(self, act: dsl.Action) -> Order:
        u, stats, catalog = self.unit, self.stats, self.catalog
        mobile = eff_speed(u, stats, catalog) > 0

        if isinstance(act, dsl.Hold):
            return IDLE

        if isinstance(act, dsl.Attack):
            target = self.select_unit(act.target)
            if target is None:
                point = self.select_point(act.target)
                return Order("move", point=point) if point and mobile else IDLE
            if has_weapon(u, stats) and can_hit(stats, catalog.stats(target.unit_type)):
                if dist(u, target) <= eff_range(u, stats, catalog):
                    if u.cooldown <= 0:
                        return Order("fire", target_uid=target.uid)
                    return IDLE  # in range, weapon cycling
            elif not mobile:
                return IDLE
            if mobile:
                return Order("move", point=(target.x, target.y))
            return IDLE

        if isinstance(act, dsl.MoveToward):
            point = self.select_point(act.target)
            return Order("move", point=point) if point and mobile else IDLE

        if isinstance(act, dsl.Retreat):
            near = _nearest(self.enemies, u)
            if near is None or not mobile:
                return IDLE
            away = _point_away(u, near, act.distance)
            return Order("move", point=away)

        if isinstance(act, dsl.Cast):
            if not ability_ready(u, act.tech, catalog):
                return IDLE
            spec = catalog.ability(act.tech)
            if spec["kind"] in ("storm", "nova"):
                point = self.select_point(act.target) if act.target else None
                if point is None:
                    return IDLE
                if dist_to(u, point[0], point[1]) > float(spec["cast_range"]):
                    return Order("move", point=point) if mobile else IDLE
                return Order("cast", tech=act.tech, point=point)
            if spec["kind"] == "blink":
                near = _nearest(self.enemies, u)
                if near is None:
                    return IDLE
                dest = _point_away(u, near, float(spec["distance"]))
                return Order("blink", tech=act.tech, point=dest)
            return Order("cast", tech=act.tech)

        if isinstance(act, dsl.Heal):
            target = self.select_unit(act.target)
            if target is None:
                return IDLE
            heal = catalog.ability("Heal")
            if dist(u, target) <= float(heal["range"]):
                return Order("heal", target_uid=target.uid)
            return Order("move", point=(target.x, target.y)) if mobile else IDLE

        raise TypeError(f"unknown action {act!r}")


def _point_away(u: LiveUnit, threat: LiveUnit, distance: float) -> tuple[float, float]:
    dx, dy = u.x - threat.x, u.y - threat.y
    norm = math.hypot(dx, dy)
    if norm == 0:
        # Standing on the threat: fall back to a fixed axis so the
        # result stays deterministic.
        dx, dy, norm = 1.0, 0.0, 1.0
    return (u.x + dx / norm * distance, u.y + dy / norm * distance)


def agent_orders(
    state: SimState, tree: dsl.BehaviorTree, catalog: UnitCatalog
) -> dict[int, Order]:
    roots = {g.unit_type: g.root for g in tree.groups}
    revealed = _revealed(state, AGENT, catalog)
    orders: dict[int, Order] = {}
    for unit in state.alive_on(AGENT):
        if unit.transform_ticks > 0:
            orders[unit.uid] = IDLE
            continue
        ctx = _PolicyCtx(state, unit, catalog, revealed)
        root = roots.get(unit.unit_type, DEFAULT_ROOT)
        orders[unit.uid] = ctx.to_order(root)
    return orders


# --- resolution ------------------------------------------------------------------


def _apply_damage(state: SimState, victim: LiveUnit, amount: float, source_side: str):
    state.accounting[f"raw_to_{victim.side}"] += amount
    state.accounting[f"dealt_by_{source_side}"] += amount
    absorbed = min(victim.shield, amount)
    victim.shield -= absorbed
    rest = amount - absorbed
    hp_loss = min(victim.hp, rest)
    victim.hp -= hp_loss
    state.accounting[f"applied_to_{victim.side}"] += absorbed + hp_loss


def _clamp(state: SimState, x: float, y: float) -> tuple[float, float]:
    return (min(max(x, 0.0), state.map_w), min(max(y, 0.0), state.map_h))


def _move_toward(state: SimState, u: LiveUnit, point: tuple[float, float], speed: float):
    dx, dy = point[0] - u.x, point[1] - u.y
    norm = math.hypot(dx, dy)
    if norm <= speed:
        u.x, u.y = point
    else:
        u.x += dx / norm * speed
        u.y += dy / norm * speed
    u.x, u.y = _clamp(state, u.x, u.y)


def _auto_charge(state: SimState, catalog: UnitCatalog):
    # Charge is a passive trigger, not an ordered action: any unit that
    # owns it lights up when an opponent comes inside trigger range.
    for u in state.units:
        if not u.alive or "Charge" not in u.techs:
            continue
        if not ability_ready(u, "Charge", catalog):
            continue
        spec = catalog.ability("Charge")
        other = ENEMY if u.side == AGENT else AGENT
        trigger = float(spec["trigger_range"])
        for opp in state.alive_on(other):
            if not opp.cloaked and dist(u, opp) <= trigger:
                u.charge_ticks = int(spec["duration"])
                u.ability_cd["Charge"] = float(spec["cooldown"])
                break


def _resolve_cast(state: SimState, u: LiveUnit, order: Order, catalog: UnitCatalog):
    spec = catalog.ability(order.tech)
    kind = spec["kind"]
    if kind == "stim":
        u.hp -= float(spec["hp_cost"])
        u.stim_ticks = int(spec["duration"])
    elif kind == "cloak":
        u.cloak_ticks = int(spec["duration"])
    elif kind == "siege":
        u.sieged = not u.sieged
        u.transform_ticks = int(spec["transform_delay"])
    elif kind == "storm":
        x, y = order.point
        state.hazards.append(Hazard(
            kind="storm", x=x, y=y, radius=float(spec["radius"]),
            damage=float(spec["damage_per_tick"]),
            ticks_remaining=int(spec["duration"]), delay=0, source_side=u.side,
        ))
    elif kind == "nova":
        x, y = order.point
        state.hazards.append(Hazard(
            kind="nova", x=x, y=y, radius=float(spec["radius"]),
            damage=float(spec["damage"]), ticks_remaining=1,
            delay=int(spec["travel_ticks"]), source_side=u.side,
        ))
    elif kind == "blink":
        u.x, u.y = _clamp(state, order.point[0], order.point[1])
    u.ability_cd[order.tech] = float(spec.get("cooldown", 0))


def step(
    state: SimState,
    tree: dsl.BehaviorTree,
    opponent,
    catalog: UnitCatalog,
) -> SimState:
    """Advance one tick in place and return the same state object."""
    orders = agent_orders(state, tree, catalog)
    orders.update(opponent(state, catalog))
    by_uid = {u.uid: u for u in state.units}

    # casts (charge triggers first, it is not an ordered action)
    _auto_charge(state, catalog)
    for u in state.units:
        if not u.alive:
            continue
        order = orders.get(u.uid)
        if order and order.kind in ("cast", "blink") and order.tech:
            _resolve_cast(state, u, order, catalog)

    # movement
    for u in state.units:
        if not u.alive:
            continue
        order = orders.get(u.uid)
        if order and order.kind == "move" and order.point:
            speed = eff_speed(u, catalog.stats(u.unit_type), catalog)
            if speed > 0:
                _move_toward(state, u, order.point, speed)

    # attacks
    for u in state.units:
        if not u.alive:
            continue
        order = orders.get(u.uid)
        if not order or order.kind != "fire":
            continue
        target = by_uid.get(order.target_uid)
        if target is None or not target.alive:
            continue
        stats = catalog.stats(u.unit_type)
        raw = max(1.0, eff_damage(u, stats, catalog) - catalog.stats(target.unit_type).armor)
        _apply_damage(state, target, raw, u.side)
        spl = splash_radius(u, stats, catalog)
        if spl > 0:
            factor = 0.5
            if u.sieged and "SiegeTech" in u.techs:
                factor = float(catalog.ability("SiegeTech")["splash_factor"])
            base = eff_damage(u, stats, catalog) * factor
            for other in state.units:
                if (
                    other.alive and other.side == target.side
                    and other.uid != target.uid
                    and dist_to(other, target.x, target.y) <= spl
                ):
                    dmg = max(1.0, base - catalog.stats(other.unit_type).armor)
                    _apply_damage(state, other, dmg, u.side)
        u.cooldown = eff_cooldown(u, stats, catalog)

    # hazards
    remaining: list[Hazard] = []
    for hz in state.hazards:
        if hz.delay > 0:
            hz.delay -= 1
            if hz.delay > 0 or hz.kind != "nova":
                remaining.append(hz)
                continue
            # nova lands this tick: one burst, then gone
            for u in state.units:
                if u.alive and dist_to(u, hz.x, hz.y) <= hz.radius:
                    _apply_damage(state, u, hz.damage, hz.source_side)
            continue
        for u in state.units:
            if u.alive and dist_to(u, hz.x, hz.y) <= hz.radius:
                _apply_damage(state, u, hz.damage, hz.source_side)
        hz.ticks_remaining -= 1
        if hz.ticks_remaining > 0:
            remaining.append(hz)
    state.hazards = remaining

    # heals
    for u in state.units:
        if not u.alive:
            continue
        order = orders.get(u.uid)
        if not order or order.kind != "heal":
            continue
        target = by_uid.get(order.target_uid)
        if target is None or not target.alive or target.hp <= 0:
            continue
        heal = catalog.ability("Heal")
        rate = float(heal["rate"])
        if "CaduceusReactor" in u.techs:
            rate *= float(catalog.ability("CaduceusReactor")["heal_multiplier"])
        target.hp = min(catalog.stats(target.unit_type).max_hp, target.hp + rate)

    # status expiry
    for u in state.units:
        if not u.alive:
            continue
        u.cooldown = max(0.0, u.cooldown - 1.0)
        u.stim_ticks = max(0, u.stim_ticks - 1)
        u.charge_ticks = max(0, u.charge_ticks - 1)
        u.cloak_ticks = max(0, u.cloak_ticks - 1)
        u.transform_ticks = max(0, u.transform_ticks - 1)
        for tech in list(u.ability_cd):
            u.ability_cd[tech] = max(0.0, u.ability_cd[tech] - 1.0)

    # death marking
    for u in state.units:
        if u.alive and u.hp <= 0:
            u.hp = 0.0
            u.alive = False

    state.tick += 1
    return state
