"""Canonical text form for policy trees.

One layout rule set, applied everywhere: group bodies indent two
spaces, decisions break across lines, conditions and actions stay on
one line. Printing the parse of printed output reproduces the bytes,
which is what makes source hashing meaningful.
"""

from __future__ import annotations

from ..hashing import fnv1a64
from . import nodes as n


def fmt_number(value: float | int) -> str:
    # Integral values print bare so "6" and "6.0" collapse to one form.
    if isinstance(value, int):
        return str(value)
    if value != value or value in (float("inf"), float("-inf")):
        raise ValueError("non-finite number in tree")
    if value == int(value):
        return str(int(value))
    text = repr(value)
    if "e" in text or "E" in text:
        # The grammar has no exponent form; expand and reparse exactly.
        text = f"{value:.324f}".rstrip("0")
    return text


def print_selector(sel: n.Selector) -> str:
    if isinstance(sel, n.NearestEnemy):
        return "(nearest-enemy)"
    if isinstance(sel, n.LowestHpEnemy):
        return "(lowest-hp-enemy)"
    if isinstance(sel, n.NearestEnemyOfType):
        return f"(nearest-enemy-of-type {sel.unit_type})"
    if isinstance(sel, n.NearestInjuredAlly):
        return "(nearest-injured-ally)"
    if isinstance(sel, n.EnemyCentroid):
        return "(enemy-centroid)"
    if isinstance(sel, n.Point):
        return f"(point {fmt_number(sel.x)} {fmt_number(sel.y)})"
    raise TypeError(f"not a selector: {sel!r}")


def print_cond(cond: n.Cond) -> str:
    if isinstance(cond, n.EnemyInRange):
        return f"(enemy-in-range {fmt_number(cond.radius)})"
    if isinstance(cond, n.HpFracBelow):
        return f"(hp-frac-below {fmt_number(cond.fraction)})"
    if isinstance(cond, n.ShieldDepleted):
        return "(shield-depleted)"
    if isinstance(cond, n.AbilityReady):
        return f"(ability-ready {cond.tech})"
    if isinstance(cond, n.EnemyCountOfAtLeast):
        return f"(enemy-count-of-at-least {cond.unit_type} {cond.count})"
    if isinstance(cond, n.AllyInjuredWithin):
        return f"(ally-injured-within {fmt_number(cond.radius)})"
    if isinstance(cond, n.DistanceToNearestEnemyAbove):
        return f"(distance-to-nearest-enemy-above {fmt_number(cond.distance)})"
    if isinstance(cond, n.InAoeHazard):
        return "(in-aoe-hazard)"
    if isinstance(cond, n.And):
        return "(and " + " ".join(print_cond(c) for c in cond.items) + ")"
    if isinstance(cond, n.Or):
        return "(or " + " ".join(print_cond(c) for c in cond.items) + ")"
    if isinstance(cond, n.Not):
        return f"(not {print_cond(cond.item)})"
    raise TypeError(f"not a condition: {cond!r}")


def print_action(act: n.Action) -> str:
    if isinstance(act, n.Attack):
        return f"(attack {print_selector(act.target)})"
    if isinstance(act, n.MoveToward):
        return f"(move-toward {print_selector(act.target)})"
    if isinstance(act, n.Retreat):
        return f"(retreat {fmt_number(act.distance)})"
    if isinstance(act, n.Cast):
        if act.target is None:
            return f"(cast {act.tech})"
        return f"(cast {act.tech} {print_selector(act.target)})"
    if isinstance(act, n.Heal):
        return f"(heal {print_selector(act.target)})"
    if isinstance(act, n.Hold):
        return "(hold)"
    raise TypeError(f"not an action: {act!r}")


def _print_node(node: n.Node, indent: int) -> str:
    pad = " " * indent
    if isinstance(node, n.Decision):
        return (
            f"{pad}(if {print_cond(node.condition)}\n"
            f"{_print_node(node.then, indent + 2)}\n"
            f"{_print_node(node.otherwise, indent + 2)})"
        )
    return pad + print_action(node)


def print_groups(groups: tuple[n.GroupPolicy, ...]) -> str:
    parts = ["(tree"]
    for group in groups:
        parts.append(f"  (group {group.unit_type}\n{_print_node(group.root, 4)})")
    return "\n".join(parts) + ")\n"


def print_tree(tree: n.BehaviorTree) -> str:
    return print_groups(tree.groups)


def make_tree(groups: tuple[n.GroupPolicy, ...] | list[n.GroupPolicy]) -> n.BehaviorTree:
    """Build a tree with its source hash derived from the canonical text."""
    groups = tuple(groups)
    return n.BehaviorTree(groups=groups, source_hash=fnv1a64(print_groups(groups)))
