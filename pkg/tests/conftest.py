import json
import random
from pathlib import Path

import pytest

from istod import ingest
from istod.database import build_database

DATA_DIR = Path(__file__).resolve().parent.parent / "data" / "fixture_multiwoz"
FIXTURES = Path(__file__).resolve().parent / "fixtures"


def load_fixture(name: str):
    return json.loads((FIXTURES / name).read_text("utf-8"))


@pytest.fixture(scope="session")
def data_dir() -> Path:
    return DATA_DIR


@pytest.fixture(scope="session")
def dictionaries():
    return ingest.load_domains(DATA_DIR)


@pytest.fixture(scope="session")
def restaurant(dictionaries):
    return dictionaries["restaurant"]


@pytest.fixture(scope="session")
def hotel(dictionaries):
    return dictionaries["hotel"]


@pytest.fixture(scope="session")
def attraction(dictionaries):
    return dictionaries["attraction"]


@pytest.fixture(scope="session")
def train(dictionaries):
    return dictionaries["train"]


@pytest.fixture(scope="session")
def conversations():
    return ingest.load_conversations(DATA_DIR / "dialogues" / "test")


def make_random_database(rows: int = 50, seed: int = 7):
    """Deterministic random table used by the brute-force oracles."""
    rng = random.Random(seed)
    pools = {
        "colour": ["red", "blue", "green", "amber"],
        "size": ["small", "medium", "large"],
        "zone": ["north", "south", "east", "west", "centre"],
        "grade": ["1", "2", "3", "4", "5"],
        "kind": ["plain", "fancy", "rustic", "modern"],
    }
    columns = ["label"] + list(pools)
    data = []
    for i in range(rows):
        row = {"label": f"item {i:02d}"}
        for column, pool in pools.items():
            row[column] = rng.choice(pool)
        data.append(row)
    return build_database("fixture", columns, data), pools
