import json
from pathlib import Path

import pytest

ORACLE = json.loads((Path(__file__).parent / "oracles" / "values.json").read_text())


@pytest.fixture(scope="session")
def oracle():
    return ORACLE


@pytest.fixture(scope="session")
def profiles():
    from bubblecluster.ansatz import default_profiles
    return default_profiles()
