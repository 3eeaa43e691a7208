import random

import pytest

from fairlink.codec import load_default_tables
from fairlink.policy import PolicyTable, PolicyTuple

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def link():
    return load_default_tables()


def random_staircase(rng: random.Random, receiver: int, length: int, quantized=True):
    """Strict power/utility staircase; quantized values provoke ties across receivers."""
    if quantized:
        powers = sorted(rng.sample(range(1, 40), length))
        utils = sorted(rng.sample(range(1, 21), length))
        tuples = [PolicyTuple(p / 10, 1, 0.0, u / 20) for p, u in zip(powers, utils)]
    else:
        powers = sorted(rng.uniform(0.01, 4.0) for _ in range(length))
        utils = sorted(rng.uniform(0.0, 1.0) for _ in range(length))
        tuples = [PolicyTuple(p, 1, 0.0, u) for p, u in zip(powers, utils)]
    return PolicyTable(receiver, tuples)


def random_instance(rng: random.Random, max_receivers=4, max_len=6):
    """Random tables, thresholds met by some tuple, and a budget covering the minima."""
    n = rng.randint(1, max_receivers)
    quantized = rng.random() < 0.5
    tables = [random_staircase(rng, r, rng.randint(1, max_len), quantized) for r in range(n)]
    u_min = [rng.choice([t.utility for t in table]) if rng.random() < 0.8 else 0.0
             for table in tables]
    floor = sum(min(t.power for t in table if t.utility >= u) for table, u in zip(tables, u_min))
    ceiling = sum(table[-1].power for table in tables)
    budget = rng.uniform(floor, ceiling * 1.1)
    if quantized:
        budget = round(budget, 1) if round(budget, 1) >= floor else floor
    return tables, u_min, budget


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
