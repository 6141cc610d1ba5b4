from fractions import Fraction

import pytest
from hypothesis import settings
from hypothesis import strategies as st

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


def rationals(lo=-20, hi=20, max_den=12):
    return st.builds(
        lambda p, q: Fraction(p, q),
        st.integers(lo * max_den, hi * max_den),
        st.integers(1, max_den),
    )


def above_one(hi=8, max_den=12):
    """Rationals strictly greater than 1."""
    return st.builds(lambda p, q: 1 + Fraction(p, q), st.integers(1, (hi - 1) * max_den), st.integers(1, max_den))


@pytest.fixture
def p3():
    from jflow.cohomology import blowup_p3

    return blowup_p3()


@pytest.fixture
def p2():
    from jflow.cohomology import blowup_p2

    return blowup_p2()


_ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture(scope="session")
def acceptance_log(pytestconfig):
    """Collects one line per acceptance criterion for the terminal summary."""
    return pytestconfig.stash.setdefault(_ACCEPTANCE, [])


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
