import numpy as np
import pytest

from raclab import InputDistribution, make_adder_erasure, make_binary_example
from raclab.infodensity import statistics


@pytest.fixture(scope="session")
def half():
    return InputDistribution.bernoulli(0.5)


@pytest.fixture(scope="session")
def adder2():
    return make_adder_erasure(2, 0.2)


@pytest.fixture(scope="session")
def adder3():
    return make_adder_erasure(3, 0.2)


@pytest.fixture(scope="session")
def binary_sym():
    return make_binary_example(0.11, 0.11)


@pytest.fixture(scope="session")
def adder2_stats(adder2, half):
    return statistics(adder2, half)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_ACCEPTANCE = []


@pytest.fixture
def report():
    """Record one acceptance line; it is echoed now and in the terminal summary."""
    def _report(number, title, passed, detail):
        line = f"ACCEPTANCE {number} [{'PASS' if passed else 'FAIL'}] {title}: {detail}"
        _ACCEPTANCE.append(line)
        print(line)
    return _report


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
