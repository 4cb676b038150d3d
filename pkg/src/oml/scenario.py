"""Experiment data model: scenario loading, validation and the bundled
12-node case study generator."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .network import AcLine, DcLine, NetworkModel, Node

COST_LEVELS = {"low": 50.0, "medium": 150.0, "high": 250.0}

SCHEMA_VERSION = 1


class ScenarioError(Exception):
    """Raised on a failed load; carries the itemized validation report."""

    def __init__(self, report):
        self.report = list(report)
        super().__init__("invalid scenario:\n" + "\n".join(self.report))


@dataclass
class Generator:
    id: str
    node: str
    type: str                 # "thermal" | "wind"
    cap: float                # MW installed
    mc: float                 # money/MWh
    load_factor: np.ndarray   # in [0, 1], length T


@dataclass
class Demand:
    node: str
    cap: np.ndarray           # MW, length T
    utility: float            # money/MWh


@dataclass
class ElectrolyzerCandidate:
    id: str
    node: str
    max_cap: float            # MW, investment upper bound
    unit_cost: float          # money/MW over the horizon
    utility: np.ndarray       # money/MWh, length T


@dataclass
class BendersSettings:
    tolerance: float = 0.1
    max_iterations: int = 50


@dataclass
class ScenarioData:
    network: NetworkModel
    horizon: int
    generators: list[Generator]
    demands: list[Demand]
    electrolyzers: list[ElectrolyzerCandidate]
    redispatch_markup: float
    benders: BendersSettings = field(default_factory=BendersSettings)
    allow_onshore_electrolyzers: bool = False
    gsk_basis: str = "all"    # "all" (thermal + wind) or "thermal"
    meta: dict = field(default_factory=dict)

    def max_marginal_cost(self) -> float:
        return max((g.mc for g in self.generators), default=0.0)

    def gsk_capacity_at_node(self) -> dict[str, float]:
        basis = {}
        for g in self.generators:
            if self.gsk_basis == "thermal" and g.type != "thermal":
                continue
            basis[g.node] = basis.get(g.node, 0.0) + g.cap
        return basis


def validate_scenario(data: ScenarioData) -> list[str]:
    """One report entry per violated invariant; empty iff the scenario is
    sound.  Entries are prefixed "error:" or "warning:"."""
    report = []
    t = data.horizon
    node_ids = set(data.network.node_ids)
    if t <= 0:
        report.append("error: horizon must be positive")
    if data.redispatch_markup <= 0:
        report.append("error: redispatch markup must be positive")
    if data.benders.tolerance <= 0 or data.benders.max_iterations <= 0:
        report.append("error: benders settings must be positive")
    max_mc = data.max_marginal_cost()
    for g in data.generators:
        if g.node not in node_ids:
            report.append(f"error: generator {g.id} references unknown node {g.node}")
        if g.type not in ("thermal", "wind"):
            report.append(f"error: generator {g.id} has unknown type {g.type}")
        if g.cap < 0 or g.mc < 0:
            report.append(f"error: generator {g.id} has negative capacity or cost")
        if len(g.load_factor) != t:
            report.append(f"error: generator {g.id} load factor series length "
                          f"{len(g.load_factor)} != horizon {t}")
        elif np.any(g.load_factor < 0) or np.any(g.load_factor > 1):
            report.append(f"error: generator {g.id} load factor out of range [0, 1]")
    for d in data.demands:
        if d.node not in node_ids:
            report.append(f"error: demand references unknown node {d.node}")
        if d.utility < 0:
            report.append(f"error: demand at {d.node} has negative utility")
        elif d.utility <= max_mc:
            report.append(f"warning: demand at {d.node} has utility below marginal cost "
                          f"({d.utility} <= {max_mc}); shedding will not be a last resort")
        if len(d.cap) != t:
            report.append(f"error: demand at {d.node} series length {len(d.cap)} != horizon {t}")
        elif np.any(d.cap < 0):
            report.append(f"error: demand at {d.node} has negative capacity")
    for e in data.electrolyzers:
        if e.node not in node_ids:
            report.append(f"error: electrolyzer {e.id} references unknown node {e.node}")
        elif not data.network.node(e.node).offshore and not data.allow_onshore_electrolyzers:
            report.append(f"error: electrolyzer {e.id} sits at onshore node {e.node} "
                          "(set allow_onshore_electrolyzers to relax)")
        if e.max_cap < 0 or e.unit_cost < 0:
            report.append(f"error: electrolyzer {e.id} has negative capacity or cost")
        if len(e.utility) != t:
            report.append(f"error: electrolyzer {e.id} utility series length "
                          f"{len(e.utility)} != horizon {t}")
        elif np.any(e.utility < 0):
            report.append(f"error: electrolyzer {e.id} has negative utility")
    return report


# ---------------------------------------------------------------------------
# JSON serialization.  Top-level keys: network, generators, demands,
# electrolyzers, series, benders, markup (+ horizon, meta).  Schema ships in
# oml/schema/scenario.schema.json.

def load_schema() -> dict:
    with resources.files("oml").joinpath("schema/scenario.schema.json").open() as fh:
        return json.load(fh)


def scenario_to_dict(data: ScenarioData) -> dict:
    series = {}

    def _series(key, arr):
        series[key] = [float(x) for x in arr]
        return key

    doc = {
        "version": SCHEMA_VERSION,
        "horizon": data.horizon,
        "network": {
            "slack": data.network.slack_node,
            "nodes": [{"id": n.id, "zone": n.zone, "offshore": n.offshore}
                      for n in data.network.nodes],
            "ac_lines": [{"id": l.id, "from": l.from_node, "to": l.to_node,
                          "reactance": l.reactance, "thermal_cap": l.thermal_cap,
                          "ram": l.ram} for l in data.network.ac_lines],
            "dc_candidates": [{"id": h.id, "from": h.from_node, "to": h.to_node,
                               "max_cap": h.max_cap, "unit_cost": h.unit_cost,
                               "ntc": h.ntc} for h in data.network.dc_candidates],
        },
        "generators": [{"id": g.id, "node": g.node, "type": g.type, "cap": g.cap,
                        "mc": g.mc, "load_factor": _series(f"lf:{g.id}", g.load_factor)}
                       for g in data.generators],
        "demands": [{"node": d.node, "utility": d.utility,
                     "cap": _series(f"demand:{d.node}", d.cap)} for d in data.demands],
        "electrolyzers": [{"id": e.id, "node": e.node, "max_cap": e.max_cap,
                           "unit_cost": e.unit_cost,
                           "utility": _series(f"h2u:{e.id}", e.utility)}
                          for e in data.electrolyzers],
        "series": series,
        "benders": {"tolerance": data.benders.tolerance,
                    "max_iterations": data.benders.max_iterations},
        "markup": data.redispatch_markup,
        "allow_onshore_electrolyzers": data.allow_onshore_electrolyzers,
        "gsk_basis": data.gsk_basis,
        "meta": data.meta,
    }
    return doc


def write_scenario(data: ScenarioData, path: str):
    with open(path, "w") as fh:
        json.dump(scenario_to_dict(data), fh, indent=1)


def scenario_from_dict(doc: dict) -> ScenarioData:
    report = _structural_report(doc)
    if report:
        raise ScenarioError(report)
    series = doc["series"]

    def _resolve(key, what):
        if key not in series:
            report.append(f"error: {what} references unknown series {key!r}")
            return np.zeros(0)
        return np.asarray(series[key], dtype=float)

    net_doc = doc["network"]
    try:
        network = NetworkModel(
            nodes=[Node(n["id"], n.get("zone", ""), bool(n.get("offshore", False)))
                   for n in net_doc["nodes"]],
            ac_lines=[AcLine(l["id"], l["from"], l["to"], l.get("reactance", 1.0),
                             l["thermal_cap"], l.get("ram", l["thermal_cap"]))
                      for l in net_doc["ac_lines"]],
            dc_candidates=[DcLine(h["id"], h["from"], h["to"], h["max_cap"],
                                  h["unit_cost"], h.get("ntc", h["max_cap"]))
                           for h in net_doc["dc_candidates"]],
            slack_node=net_doc["slack"],
        )
    except Exception as exc:
        raise ScenarioError([f"error: network: {exc}"])
    data = ScenarioData(
        network=network,
        horizon=int(doc["horizon"]),
        generators=[Generator(g["id"], g["node"], g["type"], float(g["cap"]),
                              float(g["mc"]), _resolve(g["load_factor"], f"generator {g['id']}"))
                    for g in doc["generators"]],
        demands=[Demand(d["node"], _resolve(d["cap"], f"demand {d['node']}"),
                        float(d["utility"])) for d in doc["demands"]],
        electrolyzers=[ElectrolyzerCandidate(e["id"], e["node"], float(e["max_cap"]),
                                             float(e["unit_cost"]),
                                             _resolve(e["utility"], f"electrolyzer {e['id']}"))
                       for e in doc["electrolyzers"]],
        redispatch_markup=float(doc["markup"]),
        benders=BendersSettings(float(doc["benders"]["tolerance"]),
                                int(doc["benders"]["max_iterations"])),
        allow_onshore_electrolyzers=bool(doc.get("allow_onshore_electrolyzers", False)),
        gsk_basis=doc.get("gsk_basis", "all"),
        meta=dict(doc.get("meta", {})),
    )
    report += validate_scenario(data)
    errors = [r for r in report if r.startswith("error:")]
    if errors:
        raise ScenarioError(report)
    return data


def _structural_report(doc) -> list[str]:
    report = []
    required = ["network", "generators", "demands", "electrolyzers", "series",
                "benders", "markup", "horizon"]
    for key in required:
        if key not in doc:
            report.append(f"error: missing top-level key {key!r}")
    if report:
        return report
    for key in ("nodes", "ac_lines", "dc_candidates", "slack"):
        if key not in doc["network"]:
            report.append(f"error: network missing key {key!r}")
    return report


def load_scenario(path: str) -> ScenarioData:
    with open(path) as fh:
        doc = json.load(fh)
    return scenario_from_dict(doc)


# ---------------------------------------------------------------------------
# Bundled case study: 9 onshore nodes in 3 zones, 3 offshore wind hubs,
# 9 AC lines, 6 DC candidates, 30 timesteps with six-peak profiles.

ONSHORE_ZONES = {"Z1": ["1", "2", "3"], "Z2": ["7", "8", "9"], "Z3": ["10", "11", "12"]}
OFFSHORE_ATTACH = {"4": "Z1", "6": "Z2", "5": "Z3"}

_AC_LINES = [("l1-2", "1", "2"), ("l2-3", "2", "3"), ("l7-8", "7", "8"),
             ("l8-9", "8", "9"), ("l10-11", "10", "11"), ("l11-12", "11", "12"),
             ("l3-7", "3", "7"), ("l9-10", "9", "10"), ("l12-1", "12", "1")]
_DC_LINES = [("dc3-4", "4", "3"), ("dc6-7", "6", "7"), ("dc5-12", "5", "12"),
             ("dc4-5", "4", "5"), ("dc5-6", "5", "6"), ("dc4-6", "4", "6")]
_THERMAL = [("g2", "2", 60.0), ("g9", "9", 80.0), ("g10", "10", 100.0)]
_WIND_NODES = ["4", "5", "6"]

CASE_T = 30


def _wind_profile(t: np.ndarray) -> np.ndarray:
    # six strict local maxima (t = 3, 8, ..., 28)
    return 0.55 + 0.38 * np.sin(2 * np.pi * (t - 2) / 5)


def _demand_profile(t: np.ndarray) -> np.ndarray:
    # six strict local maxima (t = 1, 6, ..., 26), misaligned with wind by 2.
    # Total demand stays above total available wind at every step (thermal is
    # always marginal, so offshore surpluses never crash the zonal price), but
    # the margin shrinks to ~150 MW at the wind peaks: there the thermal fleet
    # has almost no downward headroom left for redispatch.
    return (3354.0 + 800.0 * np.sin(2 * np.pi * t / 5)) / 6000.0


def synthesize_case_study(cost_level: str = "medium", seed: int = 0) -> ScenarioData:
    """Deterministic (seeded) rendition of the bundled case study.

    Structural parameters follow the documented values (thermal 2000 MW at
    nodes 2/9/10 with costs 60/80/100, wind 1000 MW at nodes 4/5/6, AC caps
    700 with RAM = NTC = thermal cap, utilities 200 / 27, markup 1000, DC
    candidates 2000 MW at 20/MW, electrolyzer bound 600 MW per offshore
    node).  The 30-step profiles are synthetic: six demand and six wind
    peaks, partially misaligned; the seed only perturbs the per-node demand
    weights.
    """
    if cost_level not in COST_LEVELS:
        raise ValueError(f"cost_level must be one of {sorted(COST_LEVELS)}")
    rng = np.random.default_rng(seed)
    nodes = []
    for zone, members in ONSHORE_ZONES.items():
        nodes += [Node(nid, zone, offshore=False) for nid in members]
    nodes += [Node(nid, zone, offshore=True) for nid, zone in OFFSHORE_ATTACH.items()]
    nodes.sort(key=lambda n: int(n.id))
    network = NetworkModel(
        nodes=nodes,
        ac_lines=[AcLine(lid, f, t, reactance=1.0, thermal_cap=700.0, ram=700.0)
                  for lid, f, t in _AC_LINES],
        dc_candidates=[DcLine(hid, f, t, max_cap=2000.0, unit_cost=20.0, ntc=2000.0)
                       for hid, f, t in _DC_LINES],
        slack_node="1",
    )
    t = np.arange(CASE_T, dtype=float)
    lf = _wind_profile(t)
    ones = np.ones(CASE_T)
    generators = [Generator(gid, node, "thermal", 2000.0, mc, ones.copy())
                  for gid, node, mc in _THERMAL]
    generators += [Generator(f"w{node}", node, "wind", 1000.0, 0.0, lf.copy())
                   for node in _WIND_NODES]
    onshore = [n.id for n in nodes if not n.offshore]
    weights = 1.0 + 0.3 * rng.uniform(-1.0, 1.0, size=len(onshore))
    weights /= weights.sum()
    total_demand = 6000.0 * _demand_profile(t)
    demands = [Demand(nid, w * total_demand, 200.0) for nid, w in zip(onshore, weights)]
    electrolyzers = [ElectrolyzerCandidate(f"e{node}", node, 600.0,
                                           COST_LEVELS[cost_level], 27.0 * ones.copy())
                     for node in _WIND_NODES]
    return ScenarioData(
        network=network,
        horizon=CASE_T,
        generators=generators,
        demands=demands,
        electrolyzers=electrolyzers,
        redispatch_markup=1000.0,
        # the reference convergence tolerance of 1e-1 is quoted in M-money;
        # this scenario's money unit is 1, hence 1e5
        benders=BendersSettings(tolerance=1.0e5, max_iterations=50),
        meta={"builtin": "case-study", "cost_level": cost_level, "seed": int(seed)},
    )
