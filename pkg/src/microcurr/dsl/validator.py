"""Semantic checks for parsed trees against a unit catalog."""

from __future__ import annotations

import math

from ..catalog import UnitCatalog
from . import nodes as n


class ValidationError(Exception):
    """Well-formed syntax carrying illegal semantics.

    ``kind`` is one of UnknownUnitType, IllegalAbility, TreeTooLarge,
    BadParameter, DuplicateGroup. ``path`` locates the offending node.
    """

    def __init__(self, kind: str, message: str, path: str):
        super().__init__(f"{kind} at {path}: {message}")
        self.kind = kind
        self.path = path
        self.message = message


def _check_number(value: float, what: str, path: str, frac: bool = False):
    if not math.isfinite(value):
        raise ValidationError("BadParameter", f"{what} must be finite", path)
    if value < 0:
        raise ValidationError("BadParameter", f"{what} must be nonnegative", path)
    if frac and value > 1:
        raise ValidationError("BadParameter", f"{what} must be at most 1", path)


def _check_selector(sel: n.Selector, catalog: UnitCatalog, path: str):
    if isinstance(sel, n.NearestEnemyOfType) and not catalog.has_unit(sel.unit_type):
        raise ValidationError("UnknownUnitType", f"unknown unit type {sel.unit_type!r}", path)
    if isinstance(sel, n.Point):
        _check_number(sel.x, "point x", path)
        _check_number(sel.y, "point y", path)


def _check_cond(cond: n.Cond, catalog: UnitCatalog, path: str):
    if isinstance(cond, n.EnemyInRange):
        _check_number(cond.radius, "range", path)
    elif isinstance(cond, n.HpFracBelow):
        _check_number(cond.fraction, "hp fraction", path, frac=True)
    elif isinstance(cond, n.AbilityReady):
        if not catalog.has_ability(cond.tech):
            raise ValidationError("IllegalAbility", f"unknown technology {cond.tech!r}", path)
    elif isinstance(cond, n.EnemyCountOfAtLeast):
        if not catalog.has_unit(cond.unit_type):
            raise ValidationError("UnknownUnitType", f"unknown unit type {cond.unit_type!r}", path)
        if cond.count < 0:
            raise ValidationError("BadParameter", "count must be nonnegative", path)
    elif isinstance(cond, n.AllyInjuredWithin):
        _check_number(cond.radius, "range", path)
    elif isinstance(cond, n.DistanceToNearestEnemyAbove):
        _check_number(cond.distance, "distance", path)
    elif isinstance(cond, (n.And, n.Or)):
        for idx, item in enumerate(cond.items):
            _check_cond(item, catalog, f"{path}[{idx}]")
    elif isinstance(cond, n.Not):
        _check_cond(cond.item, catalog, f"{path}.not")


def _check_action(act: n.Action, unit_type: str, catalog: UnitCatalog, path: str):
    if isinstance(act, (n.Attack, n.MoveToward)):
        _check_selector(act.target, catalog, path)
    elif isinstance(act, n.Retreat):
        _check_number(act.distance, "retreat distance", path)
    elif isinstance(act, n.Cast):
        if not catalog.has_ability(act.tech):
            raise ValidationError("IllegalAbility", f"unknown technology {act.tech!r}", path)
        if not catalog.tech_allowed(unit_type, act.tech):
            raise ValidationError(
                "IllegalAbility", f"{unit_type} cannot cast {act.tech}", path
            )
        if act.target is not None:
            _check_selector(act.target, catalog, path)
    elif isinstance(act, n.Heal):
        if not catalog.stats(unit_type).healer:
            raise ValidationError("IllegalAbility", f"{unit_type} cannot heal", path)
        _check_selector(act.target, catalog, path)


def _check_node(node: n.Node, unit_type: str, catalog: UnitCatalog, path: str):
    if isinstance(node, n.Decision):
        _check_cond(node.condition, catalog, f"{path}.cond")
        _check_node(node.then, unit_type, catalog, f"{path}.then")
        _check_node(node.otherwise, unit_type, catalog, f"{path}.else")
    else:
        _check_action(node, unit_type, catalog, path)


def validate(tree: n.BehaviorTree, catalog: UnitCatalog) -> n.BehaviorTree:
    """Raise ValidationError on the first defect; return the tree unchanged."""
    seen: set[str] = set()
    for group in tree.groups:
        path = f"group[{group.unit_type}]"
        if group.unit_type in seen:
            raise ValidationError("DuplicateGroup", "unit type appears twice", path)
        seen.add(group.unit_type)
        if not catalog.has_unit(group.unit_type):
            raise ValidationError(
                "UnknownUnitType", f"unknown unit type {group.unit_type!r}", path
            )
        if n.node_depth(group.root) > n.MAX_DEPTH:
            raise ValidationError(
                "TreeTooLarge", f"decision depth exceeds {n.MAX_DEPTH}", path
            )
        if n.node_count(group.root) > n.MAX_GROUP_NODES:
            raise ValidationError(
                "TreeTooLarge", f"node count exceeds {n.MAX_GROUP_NODES}", path
            )
        _check_node(group.root, group.unit_type, catalog, path)
    return tree
