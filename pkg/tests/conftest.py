import pytest

from qadmit.sim import NodeSpec, Topology
from qadmit.stochastic import DeterministicSpec, gamma_from_rate_scv

# criterion id -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"criterion {key:>2}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture(scope="session")
def tandem():
    return Topology.tandem([3, 5, 2], [0.33, 0.2, 0.5], 0.8)


@pytest.fixture(scope="session")
def acyclic():
    nodes = (NodeSpec(5, 0.2, 0.8), NodeSpec(3, 0.22, 0.8), NodeSpec(3, 0.11, 0.8), NodeSpec(2, 0.5, 0.8))
    return Topology(nodes, ((0, 1), (0, 2), (1, 3), (2, 3)), {0: (2 / 3, 1 / 3)})


@pytest.fixture(scope="session")
def arrival():
    return gamma_from_rate_scv(0.95, 0.7)


def det_node(servers, s):
    """Node with deterministic service time ``s``."""
    return NodeSpec(servers, 1.0 / s, 0.0)


def det_tandem(services, servers=None):
    servers = servers or [1] * len(services)
    nodes = tuple(det_node(c, s) for c, s in zip(servers, services))
    return Topology(nodes, tuple((i, i + 1) for i in range(len(nodes) - 1)))


DET = DeterministicSpec
