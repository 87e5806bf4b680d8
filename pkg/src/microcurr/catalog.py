"""Unit and ability stat tables.

The shipped catalog lives in ``data/units.json``. Scenario difficulty,
simulation damage math, and tree validation all read from the same
table, so a bad entry should fail at load time rather than mid-episode.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path


class CatalogError(Exception):
    """Catalog file missing, malformed, or referencing undefined stats."""


class UnknownUnitType(CatalogError):
    """A unit type with no catalog entry."""


# Technologies that must have a defined effect for the stock scenarios
# to be playable. Load fails loudly if any is missing.
REQUIRED_TECHS = (
    "Stimpack",
    "PersonalCloaking",
    "SiegeTech",
    "PsiStormTech",
    "ExtendedThermalLance",
    "BlinkTech",
    "Charge",
)

_UNIT_FIELDS = (
    "max_hp", "max_shield", "armor", "damage", "range",
    "cooldown", "speed", "sight", "weight",
)

_KNOWN_FLAGS = frozenset(
    {"flying", "healer", "detector", "counts_as_air", "anti_air_only"}
)


@dataclass(frozen=True)
class UnitStats:
    unit_type: str
    max_hp: float
    max_shield: float
    armor: float
    damage: float          # per hit; <= 0 means no weapon
    range: float           # cells
    cooldown: float        # ticks between attacks
    speed: float           # cells per tick
    sight: float           # cells
    weight: float          # difficulty weight
    splash_radius: float = 0.0
    flags: frozenset[str] = field(default_factory=frozenset)
    techs: frozenset[str] = field(default_factory=frozenset)

    @property
    def flying(self) -> bool:
        return "flying" in self.flags

    @property
    def healer(self) -> bool:
        return "healer" in self.flags

    @property
    def detector(self) -> bool:
        return "detector" in self.flags

    @property
    def counts_as_air(self) -> bool:
        return "counts_as_air" in self.flags

    @property
    def anti_air_only(self) -> bool:
        return "anti_air_only" in self.flags

    @property
    def has_weapon(self) -> bool:
        return self.damage > 0 and self.range > 0


@dataclass(frozen=True)
class UnitCatalog:
    units: dict[str, UnitStats]
    abilities: dict[str, dict]

    def stats(self, unit_type: str) -> UnitStats:
        try:
            return self.units[unit_type]
        except KeyError:
            raise UnknownUnitType(f"no catalog entry for unit type {unit_type!r}") from None

    def weight(self, unit_type: str) -> float:
        return self.stats(unit_type).weight

    def has_unit(self, unit_type: str) -> bool:
        return unit_type in self.units

    def ability(self, tech: str) -> dict:
        try:
            return self.abilities[tech]
        except KeyError:
            raise CatalogError(f"no ability definition for {tech!r}") from None

    def has_ability(self, tech: str) -> bool:
        return tech in self.abilities

    def tech_allowed(self, unit_type: str, tech: str) -> bool:
        """True when the catalog grants ``tech`` to ``unit_type``."""
        return tech in self.stats(unit_type).techs


def _require_number(table: str, key: str, value) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise CatalogError(f"{table}.{key} must be a number, got {value!r}")
    out = float(value)
    if out != out or out in (float("inf"), float("-inf")):
        raise CatalogError(f"{table}.{key} must be finite")
    if out < 0:
        raise CatalogError(f"{table}.{key} must be nonnegative")
    return out


def catalog_from_dict(raw: dict) -> UnitCatalog:
    if not isinstance(raw, dict) or "units" not in raw or "abilities" not in raw:
        raise CatalogError("catalog must be an object with 'units' and 'abilities' tables")

    abilities: dict[str, dict] = {}
    for tech, entry in raw["abilities"].items():
        if not isinstance(entry, dict) or "kind" not in entry:
            raise CatalogError(f"ability {tech!r} needs a 'kind' field")
        for key, value in entry.items():
            if key == "kind":
                continue
            _require_number(f"abilities.{tech}", key, value)
        abilities[tech] = dict(entry)

    units: dict[str, UnitStats] = {}
    for unit_type, entry in raw["units"].items():
        if not isinstance(entry, dict):
            raise CatalogError(f"unit {unit_type!r} entry must be an object")
        missing = [k for k in _UNIT_FIELDS if k not in entry]
        if missing:
            raise CatalogError(f"unit {unit_type!r} missing fields: {', '.join(missing)}")
        numbers = {k: _require_number(f"units.{unit_type}", k, entry[k]) for k in _UNIT_FIELDS}
        splash = _require_number(f"units.{unit_type}", "splash_radius", entry.get("splash_radius", 0.0))
        flags = frozenset(entry.get("flags", ()))
        bad = flags - _KNOWN_FLAGS
        if bad:
            raise CatalogError(f"unit {unit_type!r} has unknown flags: {sorted(bad)}")
        techs = frozenset(entry.get("techs", ()))
        for tech in techs:
            if tech not in abilities:
                raise CatalogError(f"unit {unit_type!r} grants undefined tech {tech!r}")
        units[unit_type] = UnitStats(
            unit_type=unit_type,
            splash_radius=splash,
            flags=flags,
            techs=techs,
            **numbers,
        )

    for tech in REQUIRED_TECHS:
        if tech not in abilities:
            raise CatalogError(f"required technology {tech!r} has no defined effect")

    return UnitCatalog(units=units, abilities=abilities)


def load_catalog(path: str | Path) -> UnitCatalog:
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise CatalogError(f"catalog file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise CatalogError(f"catalog file {path} is not valid JSON: {exc}") from None
    return catalog_from_dict(raw)


def shipped_catalog() -> UnitCatalog:
    """The catalog bundled with the package."""
    text = resources.files("microcurr.data").joinpath("units.json").read_text(encoding="utf-8")
    return catalog_from_dict(json.loads(text))
