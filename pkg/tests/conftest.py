import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from svdrestart.spectral import DeltaMatrix, SymSparseMatrix
from svdrestart.stream import make_rng

settings.register_profile(
    "default", max_examples=60, deadline=None,
    suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def random_sym(rng, n, density=0.2, signed=True, cls=SymSparseMatrix, diag=False):
    """Sparse symmetric matrix with roughly ``density`` of upper positions filled."""
    m = cls(n)
    for i in range(n):
        for j in range(i if diag else i + 1, n):
            if rng.random() < density:
                w = rng.normal() if signed else 1.0
                m.set(i, j, w)
    return m


def k3():
    return SymSparseMatrix.from_entries(3, [(0, 1, 1.0), (0, 2, 1.0), (1, 2, 1.0)])


@pytest.fixture
def rng():
    return make_rng(1234)


@pytest.fixture
def fixture30():
    from pathlib import Path
    return str(Path(__file__).parent / "data" / "fixture30.txt")


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for name in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[name])
