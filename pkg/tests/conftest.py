import random

import pytest
from hypothesis import settings

from phm.header_codec import Header5Tuple, Rule, encode_header
from phm.hopfield_weights import build_weight_store

# first calls into numba kernels pay the JIT load
settings.register_profile("phm", deadline=None)
settings.load_profile("phm")


def random_headers(rng, n):
    return [Header5Tuple(rng.getrandbits(32), rng.getrandbits(16), rng.getrandbits(32),
                         rng.getrandbits(16), rng.getrandbits(8)) for _ in range(n)]


def make_rules(headers, start_id=1):
    return [Rule(start_id + i, encode_header(h)) for i, h in enumerate(headers)]


def oracle_match(rules, header):
    """Linear scan for exact 104-bit equality; rule id or None."""
    target = header.to_int()
    for rule in rules:
        if rule.header.to_int() == target:
            return rule.id
    return None


@pytest.fixture(scope="session")
def store():
    return build_weight_store()


@pytest.fixture
def rng():
    return random.Random(20240611)


ACCEPTANCE_LINES = []


@pytest.fixture
def acceptance():
    """Record one pass/fail line per acceptance criterion for the terminal summary."""

    def record(criterion, title, passed, detail=""):
        status = "PASS" if passed else "FAIL"
        ACCEPTANCE_LINES.append(f"[{status}] criterion {criterion}: {title}" +
                                (f" -- {detail}" if detail else ""))
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
