import numpy as np
import pytest

from oml.network import AcLine, DcLine, NetworkModel, Node
from oml.scenario import BendersSettings, Demand, ElectrolyzerCandidate, Generator, ScenarioData


@pytest.fixture
def ac_toy():
    """Two nodes in one AC line (cap 30): thermal 100 MW at 60/MWh feeds a
    50 MW, 200/MWh load across the line.  Nodal clearing serves 30; a
    single-zone market clears 50 and redispatch sheds 20."""
    T = 2
    net = NetworkModel(
        nodes=[Node("n1", "Z1", False), Node("n2", "Z1", False)],
        ac_lines=[AcLine("l12", "n1", "n2", 1.0, 30.0, 30.0)],
        dc_candidates=[],
        slack_node="n1",
    )
    return ScenarioData(
        network=net, horizon=T,
        generators=[Generator("g1", "n1", "thermal", 100.0, 60.0, np.ones(T))],
        demands=[Demand("n2", 50.0 * np.ones(T), 200.0)],
        electrolyzers=[],
        redispatch_markup=10.0,
        benders=BendersSettings(),
    )


@pytest.fixture
def dc_toy():
    """Thermal node and an offshore load node joined only by a 100 MW DC
    candidate at 20/MW: value of capacity f is 140·min(f, 50)."""
    net = NetworkModel(
        nodes=[Node("n1", "Z1", False), Node("n2", "Z2", True)],
        ac_lines=[],
        dc_candidates=[DcLine("h1", "n1", "n2", 100.0, 20.0, 100.0)],
        slack_node="n1",
    )
    return ScenarioData(
        network=net, horizon=1,
        generators=[Generator("g1", "n1", "thermal", 100.0, 60.0, np.ones(1))],
        demands=[Demand("n2", 50.0 * np.ones(1), 200.0)],
        electrolyzers=[],
        redispatch_markup=10.0,
        benders=BendersSettings(),
    )


@pytest.fixture
def h2_toy():
    """DC toy plus an electrolyzer candidate at the offshore node: cheap
    hydrogen utility below the power price keeps the optimum interior."""
    net = NetworkModel(
        nodes=[Node("n1", "Z1", False), Node("n2", "Z2", True)],
        ac_lines=[],
        dc_candidates=[DcLine("h1", "n1", "n2", 200.0, 20.0, 200.0)],
        slack_node="n1",
    )
    T = 2
    return ScenarioData(
        network=net, horizon=T,
        generators=[Generator("g1", "n1", "thermal", 200.0, 60.0, np.ones(T))],
        demands=[Demand("n2", 50.0 * np.ones(T), 200.0)],
        electrolyzers=[ElectrolyzerCandidate("e1", "n2", 100.0, 15.0,
                                             80.0 * np.ones(T))],
        redispatch_markup=10.0,
        benders=BendersSettings(),
    )


def ring3():
    """Symmetric 3-node ring, equal reactances."""
    return NetworkModel(
        nodes=[Node("a", "Z1"), Node("b", "Z1"), Node("c", "Z1")],
        ac_lines=[AcLine("ab", "a", "b", 1.0, 1000.0, 1000.0),
                  AcLine("bc", "b", "c", 1.0, 1000.0, 1000.0),
                  AcLine("ac", "a", "c", 1.0, 1000.0, 1000.0)],
        dc_candidates=[],
        slack_node="a",
    )
