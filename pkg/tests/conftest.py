import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent))

from lieavg import presets


@pytest.fixture(scope="session")
def preset_cache():
    cache = {}

    def get(name: str):
        if name not in cache:
            cache[name] = presets.build(name)
        return cache[name]

    return get


@pytest.fixture(scope="session")
def example1(preset_cache):
    return preset_cache("example1")


@pytest.fixture(scope="session")
def example2(preset_cache):
    return preset_cache("example2")


@pytest.fixture(scope="session")
def example3(preset_cache):
    return preset_cache("example3")


@pytest.fixture(scope="session")
def example4(preset_cache):
    return preset_cache("example4")
