import os

import numpy as np
import pytest

# A shared on-disk cache makes the eigensystem fixtures cheap across runs.
os.environ.setdefault("ISOMCTL_CACHE_DIR",
                      os.path.join(os.path.dirname(__file__), ".cache"))

from isomctl.bath import BathSpec, build_tensors          # noqa: E402
from isomctl.model import ModelSpec, cached_eigensystem   # noqa: E402


@pytest.fixture(scope="session")
def es_small():
    """All bound states plus a handful of low excited states (cheap)."""
    return cached_eigensystem(ModelSpec(n_basis=80))


@pytest.fixture(scope="session")
def es_fc():
    """Smallest retention that includes the optically accessible band."""
    return cached_eigensystem(ModelSpec(n_basis=200))


@pytest.fixture(scope="session")
def es_full():
    """Default production resolution."""
    return cached_eigensystem(ModelSpec())


@pytest.fixture(scope="session")
def bath():
    return BathSpec()


@pytest.fixture(scope="session")
def tensors_small(es_small, bath):
    return build_tensors(es_small, bath)


@pytest.fixture(scope="session")
def tensors_fc(es_fc, bath):
    return build_tensors(es_fc, bath)


@pytest.fixture(scope="session")
def tensors_full(es_full, bath):
    return build_tensors(es_full, bath)
