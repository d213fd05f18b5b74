import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from oscillattr.coupling import build_laplacian
from oscillattr.energy import OscillatorParams, build_energy

settings.register_profile("default", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def locked():
    """Periodic N=4 ring with alpha=10, K=12, beta=1, eps=0.5: inside the one-dimensional regime."""
    A = build_laplacian(4, 1, 1.0, "periodic")
    params = OscillatorParams.create(4, 10.0, 12.0, beta=1.0, f=0.0, eps=0.5)
    return A, params, build_energy(A, params)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def verdict():
    """Record and print one pass/fail line per acceptance criterion, then assert it."""

    def _record(n: int, ok: bool, detail: str):
        line = f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        print(line)
        ACCEPTANCE_LINES.append(line)
        assert ok, line

    return _record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split(":")[0].split()[1])):
            terminalreporter.write_line(line)
