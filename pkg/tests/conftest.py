from pathlib import Path

import pytest

from srcpsp.instances import ProjectInstance, parse_psplib

DATA_DIR = Path(__file__).resolve().parent.parent / "data"


@pytest.fixture(scope="session")
def example_instance() -> ProjectInstance:
    """Five-activity project of the worked examples (a..e = 1..5, cap 4)."""
    return parse_psplib((DATA_DIR / "example.sch").read_text())
