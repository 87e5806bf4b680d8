"""AST for the group-policy decision-tree language.

A program assigns one policy tree per unit type. Trees are pure values:
every node type is a frozen dataclass, so structural equality and
hashing come for free and the simulator can share them across episodes.
"""

from __future__ import annotations

from dataclasses import dataclass

MAX_DEPTH = 32        # decision nesting per group
MAX_GROUP_NODES = 512  # total nodes per group tree


# --- selectors -------------------------------------------------------------

@dataclass(frozen=True)
class NearestEnemy:
    pass


@dataclass(frozen=True)
class LowestHpEnemy:
    pass


@dataclass(frozen=True)
class NearestEnemyOfType:
    unit_type: str


@dataclass(frozen=True)
class NearestInjuredAlly:
    pass


@dataclass(frozen=True)
class EnemyCentroid:
    pass


@dataclass(frozen=True)
class Point:
    x: float
    y: float


Selector = (
    NearestEnemy
    | LowestHpEnemy
    | NearestEnemyOfType
    | NearestInjuredAlly
    | EnemyCentroid
    | Point
)


# --- conditions ------------------------------------------------------------

@dataclass(frozen=True)
class EnemyInRange:
    radius: float


@dataclass(frozen=True)
class HpFracBelow:
    fraction: float


@dataclass(frozen=True)
class ShieldDepleted:
    pass


@dataclass(frozen=True)
class AbilityReady:
    tech: str


@dataclass(frozen=True)
class EnemyCountOfAtLeast:
    unit_type: str
    count: int


@dataclass(frozen=True)
class AllyInjuredWithin:
    radius: float


@dataclass(frozen=True)
class DistanceToNearestEnemyAbove:
    distance: float


@dataclass(frozen=True)
class InAoeHazard:
    pass


@dataclass(frozen=True)
class And:
    items: tuple["Cond", ...]


@dataclass(frozen=True)
class Or:
    items: tuple["Cond", ...]


@dataclass(frozen=True)
class Not:
    item: "Cond"


Cond = (
    EnemyInRange
    | HpFracBelow
    | ShieldDepleted
    | AbilityReady
    | EnemyCountOfAtLeast
    | AllyInjuredWithin
    | DistanceToNearestEnemyAbove
    | InAoeHazard
    | And
    | Or
    | Not
)


# --- actions and nodes -----------------------------------------------------

@dataclass(frozen=True)
class Attack:
    target: Selector


@dataclass(frozen=True)
class MoveToward:
    target: Selector


@dataclass(frozen=True)
class Retreat:
    distance: float


@dataclass(frozen=True)
class Cast:
    tech: str
    target: Selector | None = None


@dataclass(frozen=True)
class Heal:
    target: Selector


@dataclass(frozen=True)
class Hold:
    pass


Action = Attack | MoveToward | Retreat | Cast | Heal | Hold


@dataclass(frozen=True)
class Decision:
    condition: Cond
    then: "Node"
    otherwise: "Node"


Node = Decision | Action


@dataclass(frozen=True)
class GroupPolicy:
    unit_type: str
    root: Node


@dataclass(frozen=True)
class BehaviorTree:
    groups: tuple[GroupPolicy, ...]
    source_hash: str  # 16 hex chars over the canonical text


def node_count(node: Node) -> int:
    if isinstance(node, Decision):
        return 1 + node_count(node.then) + node_count(node.otherwise)
    return 1


def node_depth(node: Node) -> int:
    if isinstance(node, Decision):
        return 1 + max(node_depth(node.then), node_depth(node.otherwise))
    return 1
