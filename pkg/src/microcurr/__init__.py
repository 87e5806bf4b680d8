"""Curriculum-driven evolution of decision-tree policies for squad combat.

A designer LLM proposes progressively harder training tasks; a
planner/coder/critic LLM loop writes decision-tree programs for each
task; a deterministic combat simulator scores them. The loop repeats
until the final target task is mastered or an iteration cap is hit.
"""

from .catalog import CatalogError, UnitCatalog, UnknownUnitType, load_catalog, shipped_catalog
from .config import BackendConfig, ConfigError, EngineConfig, config_from_dict, load_config
from .domain import (
    CurriculumSpec,
    DomainError,
    EpisodeMetrics,
    IterationRecord,
    MapSpec,
    ObjectiveSpec,
    Outcome,
    PerformanceReport,
    RunState,
    UnitSpec,
    compute_difficulty,
    curriculum_from_dict,
    curriculum_to_dict,
    make_curriculum,
    report_from_dict,
    report_to_dict,
    spec_equals,
    stock_final_task,
)
from .dsl import BehaviorTree, ParseError, ValidationError, parse, print_tree, validate
from .arena import evaluate, run_episode
from .designer import Designer, gate, simplify, validate_curriculum
from .coder import Coder, CodeFormat, Feedback, dsl_format
from .llm import (
    BackendError,
    ChatRequest,
    HttpBackend,
    RecordingBackend,
    ReplayBackend,
    Role,
    ScriptedBackend,
)
from .orchestrator import CorruptCheckpoint, OrchestratorError, baseline_tree, resume, run

__version__ = "0.1.0"
