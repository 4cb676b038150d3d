"""Grid topology, PTDF/GSK analytics and market-design zonings.

All products are plain dataclasses plus numpy matrices, immutable after
construction and safe to share.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

log = logging.getLogger(__name__)

DESIGNS = ("fnp", "onp", "ozp", "fzp")

OFFSHORE_ZONE = "OFFSHORE"


class TopologyError(Exception):
    pass


@dataclass(frozen=True)
class Node:
    id: str
    zone: str          # onshore zone; for offshore nodes, the administratively connected one
    offshore: bool = False


@dataclass(frozen=True)
class AcLine:
    id: str
    from_node: str
    to_node: str
    reactance: float = 1.0   # relative per-unit; PTDF is scale invariant
    thermal_cap: float = 0.0  # MW
    ram: float = 0.0          # MW, tradable share under zonal clearing


@dataclass(frozen=True)
class DcLine:
    id: str
    from_node: str
    to_node: str
    max_cap: float      # MW, investment upper bound
    unit_cost: float    # money/MW
    ntc: float          # MW, market cap when the line crosses a zone border


@dataclass
class NetworkModel:
    nodes: list[Node]
    ac_lines: list[AcLine]
    dc_candidates: list[DcLine]
    slack_node: str

    def __post_init__(self):
        self._by_id = {n.id: n for n in self.nodes}
        if len(self._by_id) != len(self.nodes):
            raise TopologyError("duplicate node ids")
        for ln in self.ac_lines:
            for nid in (ln.from_node, ln.to_node):
                if nid not in self._by_id:
                    raise TopologyError(f"AC line {ln.id} references unknown node {nid}")
            if ln.reactance <= 0:
                raise TopologyError(f"AC line {ln.id} has non-positive reactance")
            if not (0 < ln.ram <= ln.thermal_cap):
                raise TopologyError(f"AC line {ln.id} violates 0 < RAM <= thermal cap")
        for h in self.dc_candidates:
            for nid in (h.from_node, h.to_node):
                if nid not in self._by_id:
                    raise TopologyError(f"DC candidate {h.id} references unknown node {nid}")
            if h.max_cap < 0:
                raise TopologyError(f"DC candidate {h.id} has negative max cap")
            if h.ntc > h.max_cap:
                raise TopologyError(f"DC candidate {h.id} has NTC above max cap")
        if self.slack_node not in self._by_id:
            raise TopologyError(f"unknown slack node {self.slack_node}")
        offshore = {n.id for n in self.nodes if n.offshore}
        touched = {nid for h in self.dc_candidates for nid in (h.from_node, h.to_node)}
        orphans = offshore - touched
        if orphans:
            raise TopologyError(f"offshore nodes without any DC candidate: {sorted(orphans)}")

    def node(self, nid: str) -> Node:
        return self._by_id[nid]

    @property
    def node_ids(self):
        return [n.id for n in self.nodes]

    def ac_incidence(self, line: AcLine, nid: str) -> int:
        """+1 if the line's defined flow leaves the node, -1 if it enters."""
        if nid == line.from_node:
            return 1
        if nid == line.to_node:
            return -1
        return 0

    def dc_incidence(self, line: DcLine, nid: str) -> int:
        if nid == line.from_node:
            return 1
        if nid == line.to_node:
            return -1
        return 0


@dataclass
class Zoning:
    design: str
    zone_of: dict[str, str]
    zones: list[str] = field(init=False)

    def __post_init__(self):
        if self.design not in DESIGNS:
            raise ValueError(f"unknown design {self.design!r}")
        self.zones = sorted(set(self.zone_of.values()))

    def nodes_in(self, zone: str):
        return [n for n, z in self.zone_of.items() if z == zone]

    def line_zone_incidence(self, network: NetworkModel, from_node: str, to_node: str, zone: str) -> int:
        inc = 0
        if self.zone_of[from_node] == zone:
            inc += 1
        if self.zone_of[to_node] == zone:
            inc -= 1
        return inc

    def monitored_dc(self, network: NetworkModel) -> list[str]:
        """Cross-zone DC candidates; zone-internal DC lines are invisible to
        a zonal market."""
        return [h.id for h in network.dc_candidates
                if self.zone_of[h.from_node] != self.zone_of[h.to_node]]


@dataclass
class PtdfSet:
    nodal: np.ndarray    # lines x nodes
    gsk: np.ndarray      # nodes x zones
    zonal: np.ndarray    # lines x zones
    node_index: dict[str, int]
    line_index: dict[str, int]
    zone_index: dict[str, int]


def build_nodal_ptdf(network: NetworkModel) -> np.ndarray:
    """Nodal PTDF matrix (lines x nodes) under the DC approximation.

    Nodes without any AC line (offshore converter buses) get an all-zero
    column: their injections reach the AC grid only through DC-line terms
    handled separately.  Any AC-connected component not containing the
    slack is a topology error.
    """
    nodes = network.node_ids
    n_idx = {nid: i for i, nid in enumerate(nodes)}
    n = len(nodes)
    m = len(network.ac_lines)
    b_mat = np.zeros((n, n))
    ac_touched = set()
    for ln in network.ac_lines:
        f, t = n_idx[ln.from_node], n_idx[ln.to_node]
        b = 1.0 / ln.reactance
        b_mat[f, f] += b
        b_mat[t, t] += b
        b_mat[f, t] -= b
        b_mat[t, f] -= b
        ac_touched.update((ln.from_node, ln.to_node))
    # connectivity: every AC-touched node must reach the slack over AC lines
    if ac_touched:
        adj = {nid: set() for nid in ac_touched}
        for ln in network.ac_lines:
            adj[ln.from_node].add(ln.to_node)
            adj[ln.to_node].add(ln.from_node)
        start = network.slack_node if network.slack_node in ac_touched else next(iter(ac_touched))
        seen, stack = {start}, [start]
        while stack:
            for nb in adj[stack.pop()]:
                if nb not in seen:
                    seen.add(nb)
                    stack.append(nb)
        unreachable = ac_touched - seen
        if unreachable or (network.slack_node not in ac_touched and ac_touched):
            raise TopologyError(
                f"AC grid disconnected from slack {network.slack_node}: {sorted(unreachable) or sorted(ac_touched)}")
    keep = [i for i, nid in enumerate(nodes) if nid != network.slack_node and nid in ac_touched]
    ptdf = np.zeros((m, n))
    if keep:
        b_red = b_mat[np.ix_(keep, keep)]
        b_inv = np.linalg.inv(b_red)
        for li, ln in enumerate(network.ac_lines):
            f, t = n_idx[ln.from_node], n_idx[ln.to_node]
            e = np.zeros(n)
            e[f], e[t] = 1.0, -1.0
            ptdf[li, keep] = (e[keep] @ b_inv) / ln.reactance
    return ptdf


def build_gsk(network: NetworkModel, zoning: Zoning, capacity_at_node: dict[str, float]) -> np.ndarray:
    """Generation shift keys (nodes x zones), pro rata with installed
    generating capacity.  A zone without capacity falls back to uniform
    weights over its nodes (logged)."""
    nodes = network.node_ids
    n_idx = {nid: i for i, nid in enumerate(nodes)}
    z_idx = {z: j for j, z in enumerate(zoning.zones)}
    gsk = np.zeros((len(nodes), len(zoning.zones)))
    for zone in zoning.zones:
        members = zoning.nodes_in(zone)
        total = sum(capacity_at_node.get(nid, 0.0) for nid in members)
        if total > 0:
            for nid in members:
                gsk[n_idx[nid], z_idx[zone]] = capacity_at_node.get(nid, 0.0) / total
        else:
            log.warning("zone %s has no generating capacity; uniform GSK fallback", zone)
            for nid in members:
                gsk[n_idx[nid], z_idx[zone]] = 1.0 / len(members)
    return gsk


def build_zonal_ptdf(nodal_ptdf: np.ndarray, gsk: np.ndarray) -> np.ndarray:
    if nodal_ptdf.shape[1] != gsk.shape[0]:
        raise ValueError("nodal PTDF / GSK dimension mismatch")
    return nodal_ptdf @ gsk


def derive_zoning(design: str, network: NetworkModel) -> Zoning:
    """Zone partition per market design.

    fnp: every node its own zone; onp: onshore zones, offshore singletons;
    ozp: onshore zones plus one shared offshore zone; fzp: offshore nodes
    join their declared onshore zone.
    """
    design = design.lower()
    if design not in DESIGNS:
        raise ValueError(f"unknown design {design!r}")
    zone_of = {}
    for node in network.nodes:
        if design == "fnp":
            zone_of[node.id] = node.id
        elif not node.offshore:
            zone_of[node.id] = node.zone
        elif design == "onp":
            zone_of[node.id] = f"OFF-{node.id}"
        elif design == "ozp":
            zone_of[node.id] = OFFSHORE_ZONE
        else:  # fzp
            if not node.zone:
                raise TopologyError(f"offshore node {node.id} lacks a declared onshore zone (needed for fzp)")
            zone_of[node.id] = node.zone
    return Zoning(design, zone_of)


def build_ptdf_set(network: NetworkModel, zoning: Zoning,
                   capacity_at_node: dict[str, float]) -> PtdfSet:
    nodal = build_nodal_ptdf(network)
    gsk = build_gsk(network, zoning, capacity_at_node)
    zonal = build_zonal_ptdf(nodal, gsk)
    return PtdfSet(
        nodal=nodal, gsk=gsk, zonal=zonal,
        node_index={nid: i for i, nid in enumerate(network.node_ids)},
        line_index={ln.id: i for i, ln in enumerate(network.ac_lines)},
        zone_index={z: j for j, z in enumerate(zoning.zones)},
    )
