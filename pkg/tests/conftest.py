import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from tromux import load_benchmark  # noqa: E402
from tromux.library import default_library  # noqa: E402
from tromux.netlist import parse_netlist  # noqa: E402

C17 = """\
INPUT(1)
INPUT(2)
INPUT(3)
INPUT(6)
INPUT(7)
OUTPUT(22)
OUTPUT(23)
10 = NAND(1, 3)
11 = NAND(3, 6)
16 = NAND(2, 11)
19 = NAND(11, 7)
22 = NAND(10, 16)
23 = NAND(16, 19)
"""


@pytest.fixture(scope="session")
def lib():
    return default_library()


@pytest.fixture(scope="session")
def c17(lib):
    return parse_netlist(C17, lib, name="c17")


@pytest.fixture(scope="session")
def bench():
    cache = {}

    def get(name):
        if name not in cache:
            cache[name] = load_benchmark(name)
        return cache[name]

    return get


def net(text, lib=None):
    return parse_netlist(text, lib or default_library())


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for num in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[num])
