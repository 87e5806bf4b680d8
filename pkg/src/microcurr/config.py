"""Engine configuration.

Thresholds are exact rationals so a 2-of-3 win rate compares equal to
the default gate instead of drifting through float rounding.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path


class ConfigError(Exception):
    """Config file missing, malformed, or carrying unknown keys."""


DEFAULT_TEMPERATURES = {
    "Designer": 0.7,
    "Planner": 0.7,
    "Coder": 0.2,
    "Critic": 0.2,
}


def parse_rational(value, what: str = "value") -> Fraction:
    """Accept "2/3", "0", or an int. Floats are refused: they are inexact."""
    if isinstance(value, bool):
        raise ConfigError(f"{what} must be a rational, got {value!r}")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, Fraction):
        return value
    if isinstance(value, str):
        try:
            return Fraction(value)
        except (ValueError, ZeroDivisionError):
            raise ConfigError(f"{what} is not a rational: {value!r}") from None
    raise ConfigError(f"{what} must be an int or 'p/q' string, got {value!r}")


@dataclass(frozen=True)
class BackendConfig:
    mode: str = "scripted"          # scripted | http | replay
    fixture_path: str | None = None  # scripted mode
    transcript_path: str | None = None  # replay mode
    endpoint: str = "https://api.openai.com/v1"
    api_key_env: str = "MICROCURR_API_KEY"
    model: str = "gpt-4o"
    models: dict = field(default_factory=dict)  # per-role overrides
    temperatures: dict = field(default_factory=lambda: dict(DEFAULT_TEMPERATURES))
    max_tokens: int = 2048
    timeout: float = 60.0


@dataclass(frozen=True)
class EngineConfig:
    theta: Fraction = Fraction(2, 3)          # curriculum advance gate
    theta_success: Fraction = Fraction(2, 3)  # per-iteration coding success
    max_iterations: int = 10
    max_attempts: int = 4
    episodes: int = 3
    base_seed: int = 1
    seed_stride: int = 1000   # evaluation seed offset per iteration
    history_window: int = 8
    designer_retries: int = 3
    feedback_cap: int = 12
    prompt_budget: int = 16000
    run_label: str = "1"
    run_dir: str | None = None
    catalog_path: str | None = None
    prompt_dir: str | None = None
    parallel_workers: int = 1
    backend: BackendConfig = field(default_factory=BackendConfig)
    final_task: dict | None = None
    final_task_path: str | None = None

    def semantic_dict(self) -> dict:
        """The settings that shape results; paths and transport excluded."""
        return {
            "theta": str(self.theta),
            "theta_success": str(self.theta_success),
            "max_iterations": self.max_iterations,
            "max_attempts": self.max_attempts,
            "episodes": self.episodes,
            "base_seed": self.base_seed,
            "seed_stride": self.seed_stride,
            "history_window": self.history_window,
            "designer_retries": self.designer_retries,
            "feedback_cap": self.feedback_cap,
            "prompt_budget": self.prompt_budget,
            "run_label": self.run_label,
        }


def config_to_dict(cfg: EngineConfig) -> dict:
    """Full round-trip encoding, paths included (checkpoint food)."""
    out: dict = {
        "theta": str(cfg.theta),
        "theta_success": str(cfg.theta_success),
        "max_iterations": cfg.max_iterations,
        "max_attempts": cfg.max_attempts,
        "episodes": cfg.episodes,
        "base_seed": cfg.base_seed,
        "seed_stride": cfg.seed_stride,
        "history_window": cfg.history_window,
        "designer_retries": cfg.designer_retries,
        "feedback_cap": cfg.feedback_cap,
        "prompt_budget": cfg.prompt_budget,
        "run_label": cfg.run_label,
        "parallel_workers": cfg.parallel_workers,
        "backend": {
            "mode": cfg.backend.mode,
            "endpoint": cfg.backend.endpoint,
            "api_key_env": cfg.backend.api_key_env,
            "model": cfg.backend.model,
            "models": dict(cfg.backend.models),
            "temperatures": dict(cfg.backend.temperatures),
            "max_tokens": cfg.backend.max_tokens,
            "timeout": cfg.backend.timeout,
        },
    }
    for key in ("run_dir", "catalog_path", "prompt_dir", "final_task_path"):
        value = getattr(cfg, key)
        if value is not None:
            out[key] = value
    if cfg.final_task is not None:
        out["final_task"] = cfg.final_task
    for key in ("fixture_path", "transcript_path"):
        value = getattr(cfg.backend, key)
        if value is not None:
            out["backend"][key] = value
    return out


_ENGINE_KEYS = {
    "theta", "theta_success", "max_iterations", "max_attempts", "episodes",
    "base_seed", "seed_stride", "history_window", "designer_retries",
    "feedback_cap", "prompt_budget", "run_label", "run_dir", "catalog_path",
    "prompt_dir", "parallel_workers", "backend", "final_task", "final_task_path",
}

_BACKEND_KEYS = {
    "mode", "fixture_path", "transcript_path", "endpoint", "api_key_env",
    "model", "models", "temperatures", "max_tokens", "timeout",
}


def config_from_dict(raw: dict) -> EngineConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object")
    unknown = set(raw) - _ENGINE_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")

    kwargs: dict = {}
    for key in ("theta", "theta_success"):
        if key in raw:
            kwargs[key] = parse_rational(raw[key], key)
    for key in (
        "max_iterations", "max_attempts", "episodes", "base_seed", "seed_stride",
        "history_window", "designer_retries", "feedback_cap", "prompt_budget",
        "parallel_workers",
    ):
        if key in raw:
            value = raw[key]
            if isinstance(value, bool) or not isinstance(value, int):
                raise ConfigError(f"{key} must be an integer")
            kwargs[key] = value
    for key in ("run_label", "run_dir", "catalog_path", "prompt_dir", "final_task_path"):
        if key in raw and raw[key] is not None:
            if not isinstance(raw[key], str):
                raise ConfigError(f"{key} must be a string")
            kwargs[key] = raw[key]
    if "final_task" in raw and raw["final_task"] is not None:
        if not isinstance(raw["final_task"], dict):
            raise ConfigError("final_task must be an object")
        kwargs["final_task"] = raw["final_task"]

    if "backend" in raw:
        braw = raw["backend"]
        if not isinstance(braw, dict):
            raise ConfigError("backend must be an object")
        unknown = set(braw) - _BACKEND_KEYS
        if unknown:
            raise ConfigError(f"unknown backend keys: {sorted(unknown)}")
        temps = dict(DEFAULT_TEMPERATURES)
        temps.update(braw.get("temperatures", {}))
        bkwargs = {k: braw[k] for k in braw if k != "temperatures"}
        kwargs["backend"] = BackendConfig(temperatures=temps, **bkwargs)

    cfg = EngineConfig(**kwargs)
    _sanity(cfg)
    return cfg


def _sanity(cfg: EngineConfig):
    if not (0 <= cfg.theta <= 1 and 0 <= cfg.theta_success <= 1):
        raise ConfigError("thresholds must lie in [0, 1]")
    for key in ("max_iterations", "max_attempts", "episodes"):
        if getattr(cfg, key) < 1:
            raise ConfigError(f"{key} must be at least 1")
    for key in ("history_window", "designer_retries", "feedback_cap",
                "prompt_budget", "parallel_workers", "seed_stride"):
        if getattr(cfg, key) < 0:
            raise ConfigError(f"{key} must be nonnegative")
    if cfg.backend.mode not in ("scripted", "http", "replay"):
        raise ConfigError(f"unknown backend mode {cfg.backend.mode!r}")


def load_config(path: str | Path) -> EngineConfig:
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from None
    return config_from_dict(raw)


def with_overrides(cfg: EngineConfig, **kwargs) -> EngineConfig:
    return replace(cfg, **kwargs)
