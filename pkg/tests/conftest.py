import numpy as np
import pytest
from hypothesis import settings

from perskern.diagrams import PersistenceDiagram

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


def random_diagram(rng, n, dim=1, scale=1.0):
    b = rng.uniform(0, scale, n)
    d = b + rng.uniform(0, scale, n)
    return PersistenceDiagram(np.full(n, dim), b, d)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    from _acceptance_log import lines

    found = lines()
    if found:
        terminalreporter.section("acceptance criteria")
        for line in found:
            terminalreporter.write_line(line)
