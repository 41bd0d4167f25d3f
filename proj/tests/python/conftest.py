import os
import sys
from pathlib import Path

import pytest

if os.environ.get("GYOLO_PYTHONPATH"):
    sys.path.insert(0, os.environ["GYOLO_PYTHONPATH"])

REPO = Path(os.environ.get("GYOLO_REPO", Path(__file__).resolve().parents[2]))


@pytest.fixture(scope="session")
def repo():
    return REPO


@pytest.fixture(scope="session")
def fixture_dir():
    return REPO / "tests" / "data" / "fixture3"


@pytest.fixture(scope="session")
def cli():
    path = os.environ.get("GYOLO_CLI")
    if not path:
        candidate = REPO / "build" / "tools" / "gyolo"
        if not candidate.exists():
            pytest.skip("gyolo CLI not built")
        path = str(candidate)
    return path
