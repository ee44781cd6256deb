import numpy as np
import pytest

from superchain.model import ChainSpec


@pytest.fixture
def base_spec():
    """N=10 wire with δ=2.5, κ=4, λ=2 (symmetric point)."""
    return ChainSpec.symmetric(10, 2.5, lam=2.0, kappa=4.0)


@pytest.fixture
def rng():
    return np.random.default_rng(7)


def random_state(rng, d):
    v = rng.normal(size=d) + 1j * rng.normal(size=d)
    return v / np.linalg.norm(v)


ACCEPTANCE_LINES = []


def record(number, name, ok, detail):
    """Print and keep one pass/fail line per acceptance criterion."""
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number:2d} {name}: {detail}"
    print(line)
    ACCEPTANCE_LINES.append((number, line))
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
