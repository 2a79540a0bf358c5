import pytest

from fluidcc import circuits
from fluidcc.compiler import compile_netlist
from fluidcc.netlist import load_netlist

SHIPPED = circuits.names()


@pytest.fixture(scope="session")
def compiled():
    """Compile each shipped circuit at most once per session."""
    cache = {}

    def get(name):
        if name not in cache:
            cache[name] = compile_netlist(load_netlist(circuits.path(name)))
        return cache[name]

    return get


@pytest.fixture
def shipped():
    return lambda name: load_netlist(circuits.path(name))


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
