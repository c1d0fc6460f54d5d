from pathlib import Path

import pytest

DATA_DIR = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def fixture_csv() -> Path:
    """Synthetic submissions file: 4775 valid rows, max waiting time 1629."""
    return DATA_DIR / "submissions_4775.csv"
