"""Decision-tree policy language: AST, parser, printer, validator."""

from .nodes import (
    AbilityReady,
    Action,
    AllyInjuredWithin,
    And,
    Attack,
    BehaviorTree,
    Cast,
    Cond,
    Decision,
    DistanceToNearestEnemyAbove,
    EnemyCentroid,
    EnemyCountOfAtLeast,
    EnemyInRange,
    GroupPolicy,
    Heal,
    Hold,
    HpFracBelow,
    InAoeHazard,
    LowestHpEnemy,
    MAX_DEPTH,
    MAX_GROUP_NODES,
    MoveToward,
    NearestEnemy,
    NearestEnemyOfType,
    NearestInjuredAlly,
    Node,
    Not,
    Or,
    Point,
    Retreat,
    Selector,
    ShieldDepleted,
    node_count,
    node_depth,
)
from .parser import ParseError, parse
from .printer import fnv1a64, make_tree, print_tree
from .validator import ValidationError, validate

__all__ = [
    "AbilityReady", "Action", "AllyInjuredWithin", "And", "Attack",
    "BehaviorTree", "Cast", "Cond", "Decision",
    "DistanceToNearestEnemyAbove", "EnemyCentroid", "EnemyCountOfAtLeast",
    "EnemyInRange", "GroupPolicy", "Heal", "Hold", "HpFracBelow",
    "InAoeHazard", "LowestHpEnemy", "MAX_DEPTH", "MAX_GROUP_NODES",
    "MoveToward", "NearestEnemy", "NearestEnemyOfType", "NearestInjuredAlly",
    "Node", "Not", "Or", "ParseError", "Point", "Retreat", "Selector",
    "ShieldDepleted", "ValidationError", "fnv1a64", "make_tree",
    "node_count", "node_depth", "parse", "print_tree", "validate",
]
