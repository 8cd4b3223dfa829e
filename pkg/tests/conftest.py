import pathlib

import pytest

REPO = pathlib.Path(__file__).resolve().parent.parent


@pytest.fixture(scope="session")
def scenarios_dir() -> pathlib.Path:
    return REPO / "scenarios"


@pytest.fixture(scope="session")
def data_dir() -> pathlib.Path:
    return pathlib.Path(__file__).resolve().parent / "data"


@pytest.fixture(scope="session")
def vectors_path() -> pathlib.Path:
    return REPO / "conformance" / "wire_vectors.txt"
