import numpy as np
import pytest

from genbo.core import Fingerprint, LookupSurface, ParameterPoint, TaskPoint

# Filled by tests/test_acceptance.py: (criterion, status, detail)
ACCEPTANCE_RESULTS: list[tuple[str, str, str]] = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, status, detail in sorted(ACCEPTANCE_RESULTS):
        terminalreporter.write_line(f"{status:<15} {name}: {detail}")


def make_surface(table, x_bits=None, w_bits=None, seed=0, n_bits=16):
    """Small surface with ids C0.. / S0.. and random (or given) fingerprints."""
    table = np.asarray(table, dtype=float)
    rng = np.random.default_rng(seed)
    n_x, n_w = table.shape
    if x_bits is None:
        x_bits = rng.random((n_x, n_bits)) < 0.4
        x_bits[:, 0] = True
    if w_bits is None:
        w_bits = rng.random((n_w, n_bits)) < 0.4
        w_bits[:, 0] = True
    params = [ParameterPoint(f"C{i}", Fingerprint(x_bits[i])) for i in range(n_x)]
    tasks = [TaskPoint(f"S{j}", Fingerprint(w_bits[j])) for j in range(n_w)]
    return LookupSurface(params, tasks, table)


@pytest.fixture
def surface_factory():
    return make_surface
