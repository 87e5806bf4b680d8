"""Recursive-descent parser for policy tree source text.

The parser is total: any input, printable or not, produces either a
``BehaviorTree`` or a ``ParseError`` carrying a 1-based line and column.
Nesting is guarded explicitly so hostile input cannot overflow the
Python stack.
"""

from __future__ import annotations

import re

from . import nodes as n
from .printer import make_tree

# Anything deeper is rejected before recursion can hurt. The semantic
# depth cap (nodes.MAX_DEPTH) is far below this.
_PARSE_DEPTH_LIMIT = 128

_NUMBER_RE = re.compile(r"-?[0-9]+(\.[0-9]+)?\Z")
_IDENT_RE = re.compile(r"[A-Za-z][A-Za-z0-9_-]*\Z")


class ParseError(Exception):
    def __init__(self, message: str, line: int, column: int, snippet: str = ""):
        super().__init__(f"line {line}, column {column}: {message}")
        self.message = message
        self.line = line
        self.column = column
        self.snippet = snippet


class _Token:
    __slots__ = ("kind", "text", "line", "column")

    def __init__(self, kind: str, text: str, line: int, column: int):
        self.kind = kind  # "(", ")", "atom", "eof"
        self.text = text
        self.line = line
        self.column = column


def _tokenize(source: str) -> list[_Token]:
    tokens: list[_Token] = []
    line = 1
    col = 1
    i = 0
    length = len(source)
    while i < length:
        ch = source[i]
        if ch == "\n":
            line += 1
            col = 1
            i += 1
        elif ch in " \t\r":
            col += 1
            i += 1
        elif ch == ";":
            while i < length and source[i] != "\n":
                i += 1
        elif ch == "(":
            tokens.append(_Token("(", "(", line, col))
            col += 1
            i += 1
        elif ch == ")":
            tokens.append(_Token(")", ")", line, col))
            col += 1
            i += 1
        else:
            start = i
            start_col = col
            while i < length and source[i] not in "() \t\r\n;":
                i += 1
                col += 1
            tokens.append(_Token("atom", source[start:i], line, start_col))
    tokens.append(_Token("eof", "", line, col))
    return tokens


class _Reader:
    def __init__(self, tokens: list[_Token], source_lines: list[str]):
        self.tokens = tokens
        self.pos = 0
        self.lines = source_lines

    def peek(self) -> _Token:
        return self.tokens[self.pos]

    def next(self) -> _Token:
        tok = self.tokens[self.pos]
        if tok.kind != "eof":
            self.pos += 1
        return tok

    def snippet_at(self, tok: _Token) -> str:
        if tok.kind == "eof":
            return "end of input"
        if 1 <= tok.line <= len(self.lines):
            return self.lines[tok.line - 1].strip()[:80]
        return tok.text

    def fail(self, message: str, tok: _Token | None = None):
        tok = tok or self.peek()
        raise ParseError(message, tok.line, tok.column, self.snippet_at(tok))

    def expect_open(self, what: str) -> _Token:
        tok = self.next()
        if tok.kind != "(":
            self.fail(f"expected '(' to open {what}, got {self._describe(tok)}", tok)
        return tok

    def expect_close(self, what: str):
        tok = self.next()
        if tok.kind != ")":
            self.fail(f"expected ')' to close {what}, got {self._describe(tok)}", tok)

    def expect_atom(self, what: str) -> _Token:
        tok = self.next()
        if tok.kind != "atom":
            self.fail(f"expected {what}, got {self._describe(tok)}", tok)
        return tok

    @staticmethod
    def _describe(tok: _Token) -> str:
        if tok.kind == "eof":
            return "end of input"
        return repr(tok.text)


def _number(reader: _Reader, what: str) -> float:
    tok = reader.expect_atom(what)
    if not _NUMBER_RE.match(tok.text):
        reader.fail(f"expected {what}, got {tok.text!r}", tok)
    return float(tok.text)


def _integer(reader: _Reader, what: str) -> int:
    tok = reader.expect_atom(what)
    if not re.match(r"-?[0-9]+\Z", tok.text):
        reader.fail(f"expected {what} (an integer), got {tok.text!r}", tok)
    return int(tok.text)


def _ident(reader: _Reader, what: str) -> str:
    tok = reader.expect_atom(what)
    if not _IDENT_RE.match(tok.text):
        reader.fail(f"expected {what}, got {tok.text!r}", tok)
    return tok.text


def _parse_selector(reader: _Reader) -> n.Selector:
    reader.expect_open("a selector")
    head = _ident(reader, "a selector name")
    if head == "nearest-enemy":
        sel: n.Selector = n.NearestEnemy()
    elif head == "lowest-hp-enemy":
        sel = n.LowestHpEnemy()
    elif head == "nearest-enemy-of-type":
        sel = n.NearestEnemyOfType(_ident(reader, "a unit type"))
    elif head == "nearest-injured-ally":
        sel = n.NearestInjuredAlly()
    elif head == "enemy-centroid":
        sel = n.EnemyCentroid()
    elif head == "point":
        sel = n.Point(_number(reader, "an x coordinate"), _number(reader, "a y coordinate"))
    else:
        reader.fail(f"unknown selector {head!r}")
    reader.expect_close(f"({head} ...)")
    return sel


def _parse_cond(reader: _Reader, depth: int) -> n.Cond:
    if depth > _PARSE_DEPTH_LIMIT:
        reader.fail("nesting too deep")
    reader.expect_open("a condition")
    head = _ident(reader, "a condition name")
    if head == "enemy-in-range":
        cond: n.Cond = n.EnemyInRange(_number(reader, "a range"))
    elif head == "hp-frac-below":
        cond = n.HpFracBelow(_number(reader, "a hp fraction"))
    elif head == "shield-depleted":
        cond = n.ShieldDepleted()
    elif head == "ability-ready":
        cond = n.AbilityReady(_ident(reader, "a technology name"))
    elif head == "enemy-count-of-at-least":
        unit_type = _ident(reader, "a unit type")
        cond = n.EnemyCountOfAtLeast(unit_type, _integer(reader, "a count"))
    elif head == "ally-injured-within":
        cond = n.AllyInjuredWithin(_number(reader, "a range"))
    elif head == "distance-to-nearest-enemy-above":
        cond = n.DistanceToNearestEnemyAbove(_number(reader, "a distance"))
    elif head == "in-aoe-hazard":
        cond = n.InAoeHazard()
    elif head in ("and", "or"):
        items = [_parse_cond(reader, depth + 1), _parse_cond(reader, depth + 1)]
        while reader.peek().kind == "(":
            items.append(_parse_cond(reader, depth + 1))
        cond = n.And(tuple(items)) if head == "and" else n.Or(tuple(items))
    elif head == "not":
        cond = n.Not(_parse_cond(reader, depth + 1))
    else:
        reader.fail(f"unknown condition {head!r}")
    reader.expect_close(f"({head} ...)")
    return cond


_ACTION_NAMES = {"attack", "move-toward", "retreat", "cast", "heal", "hold"}


def _parse_node(reader: _Reader, depth: int) -> n.Node:
    if depth > _PARSE_DEPTH_LIMIT:
        reader.fail("nesting too deep")
    open_tok = reader.expect_open("a node")
    head_tok = reader.peek()
    head = _ident(reader, "an action or 'if'")
    if head == "if":
        condition = _parse_cond(reader, depth + 1)
        then = _parse_node(reader, depth + 1)
        otherwise = _parse_node(reader, depth + 1)
        reader.expect_close("(if ...)")
        return n.Decision(condition, then, otherwise)
    if head not in _ACTION_NAMES:
        reader.fail(f"unknown action {head!r}", head_tok)
    if head == "attack":
        node: n.Node = n.Attack(_parse_selector(reader))
    elif head == "move-toward":
        node = n.MoveToward(_parse_selector(reader))
    elif head == "retreat":
        node = n.Retreat(_number(reader, "a distance"))
    elif head == "cast":
        tech = _ident(reader, "a technology name")
        target = _parse_selector(reader) if reader.peek().kind == "(" else None
        node = n.Cast(tech, target)
    elif head == "heal":
        node = n.Heal(_parse_selector(reader))
    else:  # hold
        node = n.Hold()
    reader.expect_close(f"({head} ...)")
    del open_tok
    return node


def parse(source: str | bytes) -> n.BehaviorTree:
    """Parse source text into a tree, raising ParseError on any defect."""
    if isinstance(source, bytes):
        source = source.decode("utf-8", errors="replace")
    reader = _Reader(_tokenize(source), source.split("\n"))

    reader.expect_open("the program")
    head = reader.expect_atom("'tree'")
    if head.text != "tree":
        reader.fail(f"expected 'tree', got {head.text!r}", head)

    groups: list[n.GroupPolicy] = []
    while reader.peek().kind == "(":
        reader.expect_open("a group")
        keyword = reader.expect_atom("'group'")
        if keyword.text != "group":
            reader.fail(f"expected 'group', got {keyword.text!r}", keyword)
        unit_type = _ident(reader, "a unit type")
        root = _parse_node(reader, 1)
        reader.expect_close("(group ...)")
        groups.append(n.GroupPolicy(unit_type, root))

    if not groups:
        reader.fail("expected at least one (group ...) form")
    reader.expect_close("(tree ...)")
    tail = reader.peek()
    if tail.kind != "eof":
        reader.fail("unexpected content after the program", tail)
    return make_tree(tuple(groups))
