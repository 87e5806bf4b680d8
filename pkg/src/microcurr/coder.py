"""Behavior coder: the plan, generate, compile, evaluate, critique loop
that turns a curriculum plus the previous tree into an improved tree."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

from .catalog import UnitCatalog
from .config import EngineConfig
from .domain import (
    CurriculumSpec,
    Outcome,
    PerformanceReport,
    canonical_text,
    curriculum_to_dict,
    percent,
)
from .dsl import ParseError, ValidationError, parse, print_tree, validate
from .llm import ChatRequest, Role, extract_fenced_block
from .prompting import catalog_rows, curriculum_types, load_template, map_summary

FEEDBACK_CAP = 12

PLANNER = "Planner"
CODER = "Coder"

PLANNER_SYSTEM = (
    "You are the tactics planner for a squad-combat agent. You write short, "
    "concrete strategies that a coder can implement without further context."
)
CODER_SYSTEM = (
    "You are the behavior coder for a squad-combat agent. You reply with one "
    "fenced code block containing a complete script."
)
CRITIC_SYSTEM = (
    "You are the critic for a squad-combat agent. You diagnose failed "
    "attempts and give actionable recommendations."
)

DSL_FORMAT_INSTRUCTIONS = """A decision-tree script in this s-expression language:
  (tree (group UNIT_TYPE NODE) ...)          ; one group per agent unit type
  NODE   := ACTION | (if COND NODE NODE)
  ACTION := (attack SEL) | (move-toward SEL) | (retreat D)
          | (cast TECH) | (cast TECH SEL) | (heal SEL) | (hold)
  SEL    := (nearest-enemy) | (lowest-hp-enemy) | (nearest-enemy-of-type UNIT_TYPE)
          | (nearest-injured-ally) | (enemy-centroid) | (point X Y)
  COND   := (enemy-in-range R) | (hp-frac-below F) | (shield-depleted)
          | (ability-ready TECH) | (enemy-count-of-at-least UNIT_TYPE N)
          | (ally-injured-within R) | (distance-to-nearest-enemy-above R)
          | (in-aoe-hazard) | (and COND...) | (or COND...) | (not COND)
Comments start with ';'. Use the fence tag `bt`."""


class CompileError(Exception):
    """Raised when generated code fails to parse or validate."""


@dataclass(frozen=True)
class CodeFormat:
    """How generated code is compiled and round-tripped.

    The default implements the decision-tree language; an environment
    bridge can substitute a passthrough for its own script format.
    """

    fence_tag: str
    format_instructions: str
    compile: Callable[[str], tuple[object, str]]  # text -> (artifact, canonical)
    render: Callable[[object], str]  # artifact -> canonical text


def dsl_format(catalog: UnitCatalog) -> CodeFormat:
    def compile_dsl(text: str) -> tuple[object, str]:
        try:
            tree = validate(parse(text), catalog)
        except (ParseError, ValidationError) as exc:
            raise CompileError(str(exc)) from None
        return tree, print_tree(tree)

    return CodeFormat(
        fence_tag="bt",
        format_instructions=DSL_FORMAT_INSTRUCTIONS,
        compile=compile_dsl,
        render=print_tree,
    )


@dataclass(frozen=True)
class Critique:
    text: str
    target: str  # PLANNER or CODER


@dataclass(frozen=True)
class Feedback:
    """Bounded memory of what went wrong, oldest entries evicted first."""

    entries: tuple[tuple[str, str], ...] = ()  # (source, text)
    cap: int = FEEDBACK_CAP

    def add(self, source: str, text: str) -> "Feedback":
        entries = self.entries + ((source, text),)
        if len(entries) > self.cap:
            entries = entries[len(entries) - self.cap:]
        return Feedback(entries, self.cap)

    def render(self) -> str:
        if not self.entries:
            return "none"
        return "\n".join(f"[{source}] {text}" for source, text in self.entries)


@dataclass(frozen=True)
class Attempt:
    index: int  # 1-based within the iteration
    strategy: str
    code: str
    canonical: str | None  # None when the code failed to compile
    report: PerformanceReport
    critique: Critique | None  # None on the winning attempt


@dataclass(frozen=True)
class ImproveResult:
    tree: object
    tree_source: str
    outcome: Outcome
    report: PerformanceReport
    attempts: tuple[Attempt, ...]
    feedback: Feedback


def render_report(report: PerformanceReport) -> str:
    lines = [f"win_rate: {percent(report.win_rate)}% ({report.win_rate})"]
    if report.error:
        lines.append(f"error: {report.error}")
    for m in report.episodes:
        lines.append(
            f"seed {m.seed}: {'win' if m.win else 'loss'} in {m.ticks} ticks, "
            f"damage dealt {m.damage_dealt:.0f}, taken {m.damage_taken:.0f}, "
            f"surviving hp {m.surviving_hp_fraction:.2f}"
        )
    return "\n".join(lines)


@dataclass
class Coder:
    backend: object
    config: EngineConfig
    catalog: UnitCatalog
    fmt: CodeFormat | None = None

    def __post_init__(self):
        if self.fmt is None:
            self.fmt = dsl_format(self.catalog)

    def _ask(self, role: Role, system: str, body: str) -> str:
        request = ChatRequest(
            role_id=role,
            messages=(("system", system), ("user", body)),
            temperature=self.config.backend.temperatures[role.value],
            max_tokens=self.config.backend.max_tokens,
        )
        return self.backend.complete(request)

    def plan(
        self, curriculum: CurriculumSpec, previous_source: str, feedback: Feedback
    ) -> str:
        body = load_template("planner.txt", self.config.prompt_dir).substitute(
            curriculum=canonical_text(curriculum_to_dict(curriculum)),
            map=map_summary(curriculum.map),
            units=catalog_rows(curriculum_types(curriculum), self.catalog),
            previous_tree=previous_source,
            feedback=feedback.render(),
        )
        return self._ask(Role.PLANNER, PLANNER_SYSTEM, body)

    def generate_code(self, strategy: str, previous_source: str) -> str:
        body = load_template("coder.txt", self.config.prompt_dir).substitute(
            strategy=strategy,
            previous_tree=previous_source,
            format_instructions=self.fmt.format_instructions,
        )
        return extract_fenced_block(self._ask(Role.CODER, CODER_SYSTEM, body))

    def critique(
        self, report: PerformanceReport, code: str, strategy: str
    ) -> Critique:
        body = load_template("critic.txt", self.config.prompt_dir).substitute(
            strategy=strategy,
            code=code,
            report=render_report(report),
        )
        reply = self._ask(Role.CRITIC, CRITIC_SYSTEM, body)
        # Errors mean broken code; anything else lost on tactics.
        target = CODER if report.error is not None else PLANNER
        return Critique(text=reply, target=target)

    def improve_tree(
        self,
        curriculum: CurriculumSpec,
        tree: object,
        feedback: Feedback,
        evaluator: Callable[[CurriculumSpec, object], PerformanceReport],
        max_attempts: int | None = None,
    ) -> ImproveResult:
        """Run up to max_attempts plan/code cycles against the curriculum.

        Success returns the new tree; exhaustion returns the input tree
        untouched so it stays available as the next iteration's template.
        """
        budget = max_attempts if max_attempts is not None else self.config.max_attempts
        theta_s = self.config.theta_success
        input_source = self.fmt.render(tree)
        best: PerformanceReport | None = None
        attempts: list[Attempt] = []

        for index in range(1, budget + 1):
            strategy = self.plan(curriculum, input_source, feedback)
            code = self.generate_code(strategy, input_source)
            try:
                artifact, canonical = self.fmt.compile(code)
            except CompileError as exc:
                artifact, canonical = None, None
                report = PerformanceReport(Fraction(0), (), error=str(exc))
                source = "CompileError"
            else:
                report = evaluator(curriculum, artifact)
                source = "RuntimeReport"
            if best is None or report.win_rate > best.win_rate:
                best = report
            if report.error is None and report.win_rate >= theta_s:
                attempts.append(Attempt(index, strategy, code, canonical, report, None))
                return ImproveResult(
                    tree=artifact,
                    tree_source=canonical,
                    outcome=Outcome.SUCCESS,
                    report=report,
                    attempts=tuple(attempts),
                    feedback=feedback,
                )
            crit = self.critique(report, code, strategy)
            feedback = feedback.add(source, report.error or render_report(report))
            feedback = feedback.add("Critic", crit.text)
            attempts.append(Attempt(index, strategy, code, canonical, report, crit))

        return ImproveResult(
            tree=tree,
            tree_source=input_source,
            outcome=Outcome.FAILED,
            report=best if best is not None else PerformanceReport(Fraction(0), ()),
            attempts=tuple(attempts),
            feedback=feedback,
        )
