"""Prompt template loading and shared rendering helpers."""

from __future__ import annotations

from importlib import resources
from pathlib import Path
from string import Template

from .catalog import UnitCatalog
from .domain import CurriculumSpec, MapSpec


def load_template(name: str, prompt_dir: str | None = None) -> Template:
    """Packaged template by default; a file of the same name in
    prompt_dir overrides it."""
    if prompt_dir:
        override = Path(prompt_dir) / name
        if override.is_file():
            return Template(override.read_text(encoding="utf-8"))
    text = resources.files("microcurr").joinpath(f"prompts/{name}").read_text(
        encoding="utf-8"
    )
    return Template(text)


def _fmt(value: float) -> str:
    return str(int(value)) if float(value).is_integer() else str(value)


def catalog_rows(unit_types, catalog: UnitCatalog) -> str:
    """One stat line per unit type, for prompt context."""
    lines = []
    for unit_type in sorted(set(unit_types)):
        s = catalog.stats(unit_type)
        parts = [f"hp {_fmt(s.max_hp)}"]
        if s.max_shield:
            parts.append(f"shield {_fmt(s.max_shield)}")
        if s.armor:
            parts.append(f"armor {_fmt(s.armor)}")
        if s.has_weapon:
            parts.append(
                f"damage {_fmt(s.damage)} range {_fmt(s.range)} "
                f"cooldown {_fmt(s.cooldown)}"
            )
        parts.append(f"speed {_fmt(s.speed)}")
        for flag in sorted(s.flags):
            parts.append(flag)
        if s.techs:
            parts.append("techs: " + ", ".join(sorted(s.techs)))
        lines.append(f"- {unit_type}: " + "; ".join(parts))
    return "\n".join(lines)


def map_summary(map_spec: MapSpec) -> str:
    return f"{map_spec.width}x{map_spec.height} {map_spec.terrain} ground, no obstacles"


def curriculum_types(spec: CurriculumSpec) -> list[str]:
    return [u.unit_type for u in spec.agents] + [u.unit_type for u in spec.enemies]
