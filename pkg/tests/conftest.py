import sys
from pathlib import Path

import pytest

# Make tests/oracles.py importable regardless of invocation directory.
sys.path.insert(0, str(Path(__file__).parent))

from armstack.description import default_description


@pytest.fixture(scope="session")
def desc():
    return default_description()
