import os
import sys

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

import pytest

from gfou import config, datacontroller
from gfou.gausscore import half_space
from gfou.spectral import build_spectral_model


@pytest.fixture(autouse=True)
def memory_only_cache(monkeypatch):
    """Models are memoized in memory only unless a test asks for a cache directory."""
    monkeypatch.setattr(config, "CACHE_DIR", None)
    yield


@pytest.fixture
def cache_dir(tmp_path, monkeypatch):
    monkeypatch.setattr(config, "CACHE_DIR", tmp_path / "models")
    datacontroller.clear_memory()
    yield tmp_path / "models"
    datacontroller.clear_memory()


@pytest.fixture(scope="session")
def halfline_fd():
    return build_spectral_model(half_space(0.0), 30, 2000)


@pytest.fixture(scope="session")
def halfline_hermite():
    return build_spectral_model(half_space(0.0), 10, 1000, method="hermite")
