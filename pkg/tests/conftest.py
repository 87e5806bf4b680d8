import json
from pathlib import Path

import pytest

from microcurr.catalog import catalog_from_dict, shipped_catalog
from microcurr.domain import stock_final_task

_SHIPPED_RAW = json.loads(
    (Path(__file__).parent.parent / "src/microcurr/data/units.json").read_text(
        encoding="utf-8"
    )
)


@pytest.fixture(scope="session")
def catalog():
    return shipped_catalog()


@pytest.fixture(scope="session")
def final_task(catalog):
    return stock_final_task(catalog)


@pytest.fixture(scope="session")
def make_catalog():
    """Build a small catalog for surgical arena tests.

    Custom unit tables are merged over the shipped ability table so the
    required-technology load check stays satisfied.
    """

    def build(units: dict):
        return catalog_from_dict(
            {"units": units, "abilities": _SHIPPED_RAW["abilities"]}
        )

    return build


@pytest.fixture(scope="session")
def shipped_raw():
    return _SHIPPED_RAW
