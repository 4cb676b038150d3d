"""Day-ahead clearing and redispatch as explicit LPs.

Builders emit a symbolic stage model (rows over named variables) that is
used three ways: solved directly as the oracle path, wrapped in KKT
conditions by the bilevel module, and re-used with a fixed complementarity
pattern in the sensitivity LP.  Foreign variables (the other stage's
decisions, or the HVDC capacities ``dccap[h]``) appear in rows as ordinary
names and are bound or substituted by the caller.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .network import NetworkModel, PtdfSet, Zoning
from .scenario import ScenarioData
from .solver import LpProblem, solve_lp

BALANCE_RESIDUAL_TOL = 1e-6


# ---------------------------------------------------------------------------
# symbolic stage model

@dataclass
class Row:
    name: str
    coeffs: dict[str, float]
    sense: str   # "<=" or "="
    rhs: float


@dataclass
class StageLp:
    """An LP over ``own_vars``; rows may reference foreign parameters."""
    name: str
    own_vars: list[str]
    rows: list[Row]
    objective: dict[str, float]
    obj_const: float = 0.0
    sense: str = "max"
    ranges: dict[str, tuple[float, float]] = field(default_factory=dict)

    def foreign_vars(self) -> set[str]:
        own = set(self.own_vars)
        out = set()
        for row in self.rows:
            out.update(v for v in row.coeffs if v not in own)
        out.update(v for v in self.objective if v not in own)
        return out


def substitute(rows: list[Row], values: dict[str, float]) -> list[Row]:
    """Fold fixed values of foreign variables into row right-hand sides."""
    out = []
    for row in rows:
        coeffs, rhs = {}, row.rhs
        for vn, c in row.coeffs.items():
            if vn in values:
                rhs -= c * values[vn]
            else:
                coeffs[vn] = c
        out.append(Row(row.name, coeffs, row.sense, rhs))
    return out


def stage_to_problem(stage: StageLp, fixed: dict[str, float] | None = None) -> LpProblem:
    rows = substitute(stage.rows, fixed) if fixed else stage.rows
    prob = LpProblem(name=stage.name, sense=stage.sense, obj_const=stage.obj_const)
    for vn in stage.own_vars:
        prob.add_var(vn)
    obj = {}
    for vn, c in stage.objective.items():
        if fixed and vn in fixed:
            prob.obj_const += c * fixed[vn]
        else:
            obj[vn] = c
    prob.objective = obj
    for row in rows:
        prob.add_constraint(row.name, row.coeffs, row.sense, row.rhs)
    return prob


# variable / row naming

def v_gen(g, t):
    return f"y[{g},{t}]"


def v_dem(n, t):
    return f"d[{n},{t}]"


def v_h2(e, t):
    return f"dh2[{e},{t}]"


def v_fac(l, t):
    return f"fac[{l},{t}]"


def v_fdc(h, t):
    return f"fdc[{h},{t}]"


def v_h2cap(e):
    return f"h2cap[{e}]"


def v_dccap(h):
    return f"dccap[{h}]"


def v_adj(kind, ident, t):
    return f"{kind}[{ident},{t}]"


def v_facr(l, t):
    return f"facr[{l},{t}]"


def v_fdcr(h, t):
    return f"fdcr[{h},{t}]"


def balance_row(unit, t, stage="market"):
    return f"bal_{stage}[{unit},{t}]"


# ---------------------------------------------------------------------------
# clearing stage (lower level 1)

@dataclass
class ClearingStage:
    stage: StageLp
    zoning: Zoning
    monitored: list[str]          # DC candidates with a market variable
    pricing_units: list[str]      # node ids (nodal) or zone ids (zonal)

    def surplus_expr(self, scenario: ScenarioData, t: int) -> dict[str, float]:
        expr = {}
        for d in scenario.demands:
            expr[v_dem(d.node, t)] = d.utility
        for e in scenario.electrolyzers:
            expr[v_h2(e.id, t)] = float(e.utility[t])
        for g in scenario.generators:
            expr[v_gen(g.id, t)] = expr.get(v_gen(g.id, t), 0.0) - g.mc
        return expr


def build_clearing_stage(scenario: ScenarioData, zoning: Zoning, ptdfs: PtdfSet) -> ClearingStage:
    """LL1: electrolyzer sizing plus day-ahead dispatch.

    Nodal designs cap physical flows per line; zonal designs cap commercial
    AC flows by RAM and monitored cross-zone DC flows by both the static NTC
    and the invested capacity, with Advanced-Hybrid-Coupling terms carrying
    the converter-node impact of DC flows into the AC flow rows.  HVDC
    capacities enter as foreign variables ``dccap[h]``.
    """
    net = scenario.network
    T = scenario.horizon
    nodal = zoning.design == "fnp"
    monitored = [h.id for h in net.dc_candidates] if nodal else zoning.monitored_dc(net)
    dc_by_id = {h.id: h for h in net.dc_candidates}

    own, rows, obj, ranges = [], [], {}, {}
    for e in scenario.electrolyzers:
        vn = v_h2cap(e.id)
        own.append(vn)
        ranges[vn] = (0.0, e.max_cap)
        obj[vn] = -e.unit_cost
        rows.append(Row(f"h2cap_lo[{e.id}]", {vn: -1.0}, "<=", 0.0))
        rows.append(Row(f"h2cap_up[{e.id}]", {vn: 1.0}, "<=", e.max_cap))

    gens_at = {}
    for g in scenario.generators:
        gens_at.setdefault(g.node, []).append(g)

    for t in range(T):
        for g in scenario.generators:
            vn = v_gen(g.id, t)
            own.append(vn)
            cap = float(g.load_factor[t]) * g.cap
            ranges[vn] = (0.0, cap)
            obj[vn] = -g.mc
            rows.append(Row(f"y_lo[{g.id},{t}]", {vn: -1.0}, "<=", 0.0))
            rows.append(Row(f"y_up[{g.id},{t}]", {vn: 1.0}, "<=", cap))
        for d in scenario.demands:
            vn = v_dem(d.node, t)
            own.append(vn)
            cap = float(d.cap[t])
            ranges[vn] = (0.0, cap)
            obj[vn] = d.utility
            rows.append(Row(f"d_lo[{d.node},{t}]", {vn: -1.0}, "<=", 0.0))
            rows.append(Row(f"d_up[{d.node},{t}]", {vn: 1.0}, "<=", cap))
        for e in scenario.electrolyzers:
            vn = v_h2(e.id, t)
            own.append(vn)
            ranges[vn] = (0.0, e.max_cap)
            obj[vn] = float(e.utility[t])
            rows.append(Row(f"dh2_lo[{e.id},{t}]", {vn: -1.0}, "<=", 0.0))
            rows.append(Row(f"dh2_up[{e.id},{t}]", {vn: 1.0, v_h2cap(e.id): -1.0}, "<=", 0.0))
        for h_id in monitored:
            h = dc_by_id[h_id]
            vn = v_fdc(h_id, t)
            own.append(vn)
            ranges[vn] = (-h.max_cap, h.max_cap)
            rows.append(Row(f"fdc_up[{h_id},{t}]", {vn: 1.0, v_dccap(h_id): -1.0}, "<=", 0.0))
            rows.append(Row(f"fdc_lo[{h_id},{t}]", {vn: -1.0, v_dccap(h_id): -1.0}, "<=", 0.0))
            if not nodal:
                rows.append(Row(f"fdc_ntc_up[{h_id},{t}]", {vn: 1.0}, "<=", h.ntc))
                rows.append(Row(f"fdc_ntc_lo[{h_id},{t}]", {vn: -1.0}, "<=", h.ntc))

        for li, line in enumerate(net.ac_lines):
            vn = v_fac(line.id, t)
            own.append(vn)
            cap = line.thermal_cap if nodal else line.ram
            ranges[vn] = (-cap, cap)
            coeffs = {vn: 1.0}
            if nodal:
                for ni, nid in enumerate(net.node_ids):
                    w = ptdfs.nodal[li, ni]
                    if abs(w) < 1e-12:
                        continue
                    for g in gens_at.get(nid, []):
                        coeffs[v_gen(g.id, t)] = coeffs.get(v_gen(g.id, t), 0.0) - w
                    for d in scenario.demands:
                        if d.node == nid:
                            coeffs[v_dem(d.node, t)] = coeffs.get(v_dem(d.node, t), 0.0) + w
                    for e in scenario.electrolyzers:
                        if e.node == nid:
                            coeffs[v_h2(e.id, t)] = coeffs.get(v_h2(e.id, t), 0.0) + w
                    for h in net.dc_candidates:
                        inc = net.dc_incidence(h, nid)
                        if inc:
                            coeffs[v_fdc(h.id, t)] = coeffs.get(v_fdc(h.id, t), 0.0) + w * inc
            else:
                for zid, zj in ptdfs.zone_index.items():
                    w = ptdfs.zonal[li, zj]
                    if abs(w) < 1e-12:
                        continue
                    for g in scenario.generators:
                        if zoning.zone_of[g.node] == zid:
                            coeffs[v_gen(g.id, t)] = coeffs.get(v_gen(g.id, t), 0.0) - w
                    for d in scenario.demands:
                        if zoning.zone_of[d.node] == zid:
                            coeffs[v_dem(d.node, t)] = coeffs.get(v_dem(d.node, t), 0.0) + w
                    for e in scenario.electrolyzers:
                        if zoning.zone_of[e.node] == zid:
                            coeffs[v_h2(e.id, t)] = coeffs.get(v_h2(e.id, t), 0.0) + w
                    for h_id in monitored:
                        h = dc_by_id[h_id]
                        inc = zoning.line_zone_incidence(net, h.from_node, h.to_node, zid)
                        if inc:
                            coeffs[v_fdc(h_id, t)] = coeffs.get(v_fdc(h_id, t), 0.0) + w * inc
                # Advanced Hybrid Coupling: converter-node impact via nodal PTDFs
                for h_id in monitored:
                    h = dc_by_id[h_id]
                    fi = ptdfs.node_index[h.from_node]
                    ti = ptdfs.node_index[h.to_node]
                    ahc = ptdfs.nodal[li, ti] - ptdfs.nodal[li, fi]
                    if abs(ahc) > 1e-12:
                        coeffs[v_fdc(h_id, t)] = coeffs.get(v_fdc(h_id, t), 0.0) - ahc
            rows.append(Row(f"acdef[{line.id},{t}]", coeffs, "=", 0.0))
            rows.append(Row(f"fac_up[{line.id},{t}]", {vn: 1.0}, "<=", cap))
            rows.append(Row(f"fac_lo[{line.id},{t}]", {vn: -1.0}, "<=", cap))

        # balance rows (nodal: per node; zonal: per zone)
        if nodal:
            units = net.node_ids
        else:
            units = zoning.zones
        for unit in units:
            coeffs = {}
            members = [unit] if nodal else zoning.nodes_in(unit)
            for nid in members:
                for g in gens_at.get(nid, []):
                    coeffs[v_gen(g.id, t)] = coeffs.get(v_gen(g.id, t), 0.0) + 1.0
                for d in scenario.demands:
                    if d.node == nid:
                        coeffs[v_dem(d.node, t)] = -1.0
                for e in scenario.electrolyzers:
                    if e.node == nid:
                        coeffs[v_h2(e.id, t)] = -1.0
            for h_id in monitored:
                h = dc_by_id[h_id]
                if nodal:
                    inc = net.dc_incidence(h, unit)
                else:
                    inc = zoning.line_zone_incidence(net, h.from_node, h.to_node, unit)
                if inc:
                    coeffs[v_fdc(h_id, t)] = coeffs.get(v_fdc(h_id, t), 0.0) - inc
            for line in net.ac_lines:
                if nodal:
                    inc = net.ac_incidence(line, unit)
                else:
                    inc = zoning.line_zone_incidence(net, line.from_node, line.to_node, unit)
                if inc:
                    coeffs[v_fac(line.id, t)] = coeffs.get(v_fac(line.id, t), 0.0) - inc
            rows.append(Row(balance_row(unit, t), coeffs, "=", 0.0))

    stage = StageLp("clearing", own, rows, obj, 0.0, "max", ranges)
    return ClearingStage(stage, zoning, monitored, units)


# ---------------------------------------------------------------------------
# redispatch stage (lower level 2), one timestep; always nodal physics

ADJ_KINDS = ("yu", "yd", "du", "dd", "h2u", "h2d")


@dataclass
class RedispatchStage:
    stage: StageLp
    t: int

    def true_cost_expr(self, scenario: ScenarioData, t: int) -> dict[str, float]:
        """R_t without the mark-up: utility of lost consumption plus fuel
        cost of extra generation (negative terms for the reverse moves)."""
        expr = {}
        for d in scenario.demands:
            expr[v_adj("dd", d.node, t)] = d.utility
            expr[v_adj("du", d.node, t)] = -d.utility
        for e in scenario.electrolyzers:
            expr[v_adj("h2d", e.id, t)] = float(e.utility[t])
            expr[v_adj("h2u", e.id, t)] = -float(e.utility[t])
        for g in scenario.generators:
            expr[v_adj("yu", g.id, t)] = g.mc
            expr[v_adj("yd", g.id, t)] = -g.mc
        return expr


def build_redispatch_stage(scenario: ScenarioData, ptdfs: PtdfSet, t: int) -> RedispatchStage:
    """LL2 at timestep t.  Foreign variables: the day-ahead quantities
    (y, d, dh2, h2cap) and the HVDC capacities dccap[h].  The final
    quantities (y + yu - yd etc.) are substituted into flow and balance
    rows rather than kept as separate variables."""
    net = scenario.network
    a = scenario.redispatch_markup
    own, rows, obj, ranges = [], [], {}, {}

    def _pair(kind_u, kind_d, ident, base_var, lo_cap_expr, up_cap, t):
        """up adjustment bounded by headroom (up_cap - base), down by base."""
        vu, vd = v_adj(kind_u, ident, t), v_adj(kind_d, ident, t)
        own.extend([vu, vd])
        ranges[vu] = (0.0, max(up_cap, 0.0))
        ranges[vd] = (0.0, max(up_cap, 0.0))
        rows.append(Row(f"{kind_u}_lo[{ident},{t}]", {vu: -1.0}, "<=", 0.0))
        up_coeffs = {vu: 1.0, base_var: 1.0}
        up_coeffs.update(lo_cap_expr)
        rows.append(Row(f"{kind_u}_up[{ident},{t}]", up_coeffs, "<=", up_cap))
        rows.append(Row(f"{kind_d}_lo[{ident},{t}]", {vd: -1.0}, "<=", 0.0))
        rows.append(Row(f"{kind_d}_up[{ident},{t}]", {vd: 1.0, base_var: -1.0}, "<=", 0.0))
        return vu, vd

    for g in scenario.generators:
        cap = float(g.load_factor[t]) * g.cap
        vu, vd = _pair("yu", "yd", g.id, v_gen(g.id, t), {}, cap, t)
        obj[vu] = g.mc + a
        obj[vd] = -g.mc + a
    for d in scenario.demands:
        cap = float(d.cap[t])
        vu, vd = _pair("du", "dd", d.node, v_dem(d.node, t), {}, cap, t)
        obj[vu] = -d.utility + a
        obj[vd] = d.utility + a
    for e in scenario.electrolyzers:
        # headroom is the invested capacity (a foreign variable)
        vu, vd = v_adj("h2u", e.id, t), v_adj("h2d", e.id, t)
        own.extend([vu, vd])
        ranges[vu] = (0.0, e.max_cap)
        ranges[vd] = (0.0, e.max_cap)
        rows.append(Row(f"h2u_lo[{e.id},{t}]", {vu: -1.0}, "<=", 0.0))
        rows.append(Row(f"h2u_up[{e.id},{t}]",
                        {vu: 1.0, v_h2(e.id, t): 1.0, v_h2cap(e.id): -1.0}, "<=", 0.0))
        rows.append(Row(f"h2d_lo[{e.id},{t}]", {vd: -1.0}, "<=", 0.0))
        rows.append(Row(f"h2d_up[{e.id},{t}]", {vd: 1.0, v_h2(e.id, t): -1.0}, "<=", 0.0))
        obj[vu] = -float(e.utility[t]) + a
        obj[vd] = float(e.utility[t]) + a

    for h in net.dc_candidates:
        vn = v_fdcr(h.id, t)
        own.append(vn)
        ranges[vn] = (-h.max_cap, h.max_cap)
        rows.append(Row(f"fdcr_up[{h.id},{t}]", {vn: 1.0, v_dccap(h.id): -1.0}, "<=", 0.0))
        rows.append(Row(f"fdcr_lo[{h.id},{t}]", {vn: -1.0, v_dccap(h.id): -1.0}, "<=", 0.0))

    gens_at = {}
    for g in scenario.generators:
        gens_at.setdefault(g.node, []).append(g)

    def _injection_terms(nid, weight, coeffs):
        for g in gens_at.get(nid, []):
            for vn, s in ((v_gen(g.id, t), 1.0), (v_adj("yu", g.id, t), 1.0),
                          (v_adj("yd", g.id, t), -1.0)):
                coeffs[vn] = coeffs.get(vn, 0.0) + weight * s
        for d in scenario.demands:
            if d.node == nid:
                for vn, s in ((v_dem(d.node, t), -1.0), (v_adj("du", d.node, t), -1.0),
                              (v_adj("dd", d.node, t), 1.0)):
                    coeffs[vn] = coeffs.get(vn, 0.0) + weight * s
        for e in scenario.electrolyzers:
            if e.node == nid:
                for vn, s in ((v_h2(e.id, t), -1.0), (v_adj("h2u", e.id, t), -1.0),
                              (v_adj("h2d", e.id, t), 1.0)):
                    coeffs[vn] = coeffs.get(vn, 0.0) + weight * s
        for h in net.dc_candidates:
            inc = net.dc_incidence(h, nid)
            if inc:
                coeffs[v_fdcr(h.id, t)] = coeffs.get(v_fdcr(h.id, t), 0.0) - weight * inc

    for li, line in enumerate(net.ac_lines):
        vn = v_facr(line.id, t)
        own.append(vn)
        ranges[vn] = (-line.thermal_cap, line.thermal_cap)
        coeffs = {vn: 1.0}
        for ni, nid in enumerate(net.node_ids):
            w = ptdfs.nodal[li, ni]
            if abs(w) > 1e-12:
                _injection_terms(nid, -w, coeffs)
        rows.append(Row(f"acrdef[{line.id},{t}]", coeffs, "=", 0.0))
        rows.append(Row(f"facr_up[{line.id},{t}]", {vn: 1.0}, "<=", line.thermal_cap))
        rows.append(Row(f"facr_lo[{line.id},{t}]", {vn: -1.0}, "<=", line.thermal_cap))

    for nid in net.node_ids:
        coeffs = {}
        _injection_terms(nid, 1.0, coeffs)
        for line in net.ac_lines:
            inc = net.ac_incidence(line, nid)
            if inc:
                coeffs[v_facr(line.id, t)] = coeffs.get(v_facr(line.id, t), 0.0) - inc
        rows.append(Row(balance_row(nid, t, stage="rt"), coeffs, "=", 0.0))

    stage = StageLp(f"redispatch[{t}]", own, rows, obj, 0.0, "min", ranges)
    return RedispatchStage(stage, t)


# ---------------------------------------------------------------------------
# outcomes

@dataclass
class MarketOutcome:
    design: str
    horizon: int
    dispatch: dict[str, np.ndarray]          # y per generator
    served: dict[str, np.ndarray]            # d per demand node
    h2_consumption: dict[str, np.ndarray]    # dh2 per electrolyzer
    ac_flows: dict[str, np.ndarray]
    dc_flows: dict[str, np.ndarray]          # only lines the design observes
    h2_capacity: dict[str, float]
    prices: dict[str, np.ndarray]            # per pricing unit (node or zone)
    surplus: np.ndarray
    zoning: Zoning

    def price_at_node(self, node: str, t: int | None = None):
        unit = node if self.design == "fnp" else self.zoning.zone_of[node]
        series = self.prices[unit]
        return series if t is None else float(series[t])


@dataclass
class RedispatchOutcome:
    horizon: int
    dispatch: dict[str, np.ndarray]          # y^r
    served: dict[str, np.ndarray]
    h2_consumption: dict[str, np.ndarray]
    up: dict[str, dict[str, np.ndarray]]     # kind -> id -> series
    down: dict[str, dict[str, np.ndarray]]
    ac_flows: dict[str, np.ndarray]
    dc_flows: dict[str, np.ndarray]
    true_cost: np.ndarray                    # R_t, mark-up excluded

    def total_adjustment(self) -> float:
        tot = 0.0
        for group in (self.up, self.down):
            for series_by_id in group.values():
                for series in series_by_id.values():
                    tot += float(np.sum(series))
        return tot


def extract_market_outcome(scenario: ScenarioData, clearing: ClearingStage,
                           primal: dict[str, float],
                           duals: dict[str, float] | None) -> MarketOutcome:
    T = scenario.horizon
    zoning = clearing.zoning

    def series(fn, ids):
        return {i: np.array([primal[fn(i, t)] for t in range(T)]) for i in ids}

    prices = {}
    if duals is not None:
        for unit in clearing.pricing_units:
            prices[unit] = np.array([-duals[balance_row(unit, t)] for t in range(T)])
    surplus = np.array([sum(c * primal[vn] for vn, c in
                            clearing.surplus_expr(scenario, t).items())
                        for t in range(T)])
    return MarketOutcome(
        design=zoning.design,
        horizon=T,
        dispatch=series(v_gen, [g.id for g in scenario.generators]),
        served=series(v_dem, [d.node for d in scenario.demands]),
        h2_consumption=series(v_h2, [e.id for e in scenario.electrolyzers]),
        ac_flows=series(v_fac, [l.id for l in scenario.network.ac_lines]),
        dc_flows=series(v_fdc, clearing.monitored),
        h2_capacity={e.id: primal[v_h2cap(e.id)] for e in scenario.electrolyzers},
        prices=prices,
        surplus=surplus,
        zoning=zoning,
    )


def extract_redispatch_outcome(scenario: ScenarioData, market: MarketOutcome,
                               primal_by_t: list[dict[str, float]]) -> RedispatchOutcome:
    T = scenario.horizon
    net = scenario.network

    def adj(kind, ident):
        return np.array([primal_by_t[t][v_adj(kind, ident, t)] for t in range(T)])

    gen_ids = [g.id for g in scenario.generators]
    dem_ids = [d.node for d in scenario.demands]
    h2_ids = [e.id for e in scenario.electrolyzers]
    up = {"y": {g: adj("yu", g) for g in gen_ids},
          "d": {n: adj("du", n) for n in dem_ids},
          "h2": {e: adj("h2u", e) for e in h2_ids}}
    down = {"y": {g: adj("yd", g) for g in gen_ids},
            "d": {n: adj("dd", n) for n in dem_ids},
            "h2": {e: adj("h2d", e) for e in h2_ids}}
    true_cost = np.zeros(T)
    for t in range(T):
        for d in scenario.demands:
            true_cost[t] += d.utility * (down["d"][d.node][t] - up["d"][d.node][t])
        for e in scenario.electrolyzers:
            true_cost[t] += float(e.utility[t]) * (down["h2"][e.id][t] - up["h2"][e.id][t])
        for g in scenario.generators:
            true_cost[t] += g.mc * (up["y"][g.id][t] - down["y"][g.id][t])
    return RedispatchOutcome(
        horizon=T,
        dispatch={g: market.dispatch[g] + up["y"][g] - down["y"][g] for g in gen_ids},
        served={n: market.served[n] + up["d"][n] - down["d"][n] for n in dem_ids},
        h2_consumption={e: market.h2_consumption[e] + up["h2"][e] - down["h2"][e]
                        for e in h2_ids},
        up=up, down=down,
        ac_flows={l.id: np.array([primal_by_t[t][v_facr(l.id, t)] for t in range(T)])
                  for l in net.ac_lines},
        dc_flows={h.id: np.array([primal_by_t[t][v_fdcr(h.id, t)] for t in range(T)])
                  for h in net.dc_candidates},
        true_cost=true_cost,
    )


# ---------------------------------------------------------------------------
# oracle solves

def solve_clearing_lp(scenario: ScenarioData, zoning: Zoning, ptdfs: PtdfSet,
                      dc_caps: dict[str, float]) -> MarketOutcome:
    """Solve LL1 directly with the HVDC capacities fixed; prices are the
    balance-constraint duals."""
    clearing = build_clearing_stage(scenario, zoning, ptdfs)
    fixed = {v_dccap(h): cap for h, cap in dc_caps.items()}
    prob = stage_to_problem(clearing.stage, fixed)
    res = solve_lp(prob)
    if res.status != "optimal":
        raise RuntimeError(f"clearing LP unexpectedly {res.status}: {res.backend_log}")
    return extract_market_outcome(scenario, clearing, res.primal, res.duals)


def market_values(scenario: ScenarioData, outcome: MarketOutcome) -> dict[str, float]:
    """Day-ahead quantities as a substitution map for LL2 rows."""
    values = {}
    for g_id, series in outcome.dispatch.items():
        for t, x in enumerate(series):
            values[v_gen(g_id, t)] = float(x)
    for n, series in outcome.served.items():
        for t, x in enumerate(series):
            values[v_dem(n, t)] = float(x)
    for e_id, series in outcome.h2_consumption.items():
        for t, x in enumerate(series):
            values[v_h2(e_id, t)] = float(x)
    for e_id, cap in outcome.h2_capacity.items():
        values[v_h2cap(e_id)] = float(cap)
    return values


def solve_redispatch(scenario: ScenarioData, ptdfs: PtdfSet, market: MarketOutcome,
                     dc_caps: dict[str, float]) -> RedispatchOutcome:
    """Solve LL2 per timestep with the market outcome taken as data."""
    fixed = market_values(scenario, market)
    fixed.update({v_dccap(h): cap for h, cap in dc_caps.items()})
    primal_by_t = []
    for t in range(scenario.horizon):
        rd = build_redispatch_stage(scenario, ptdfs, t)
        prob = stage_to_problem(rd.stage, fixed)
        res = solve_lp(prob)
        if res.status != "optimal":
            raise RuntimeError(f"redispatch LP at t={t} unexpectedly {res.status}")
        primal_by_t.append(res.primal)
    return extract_redispatch_outcome(scenario, market, primal_by_t)


def compute_surplus(scenario: ScenarioData, outcome: MarketOutcome) -> np.ndarray:
    """S_t: consumption utility less generation cost, from raw quantities."""
    T = scenario.horizon
    s = np.zeros(T)
    for d in scenario.demands:
        s += d.utility * outcome.served[d.node]
    for e in scenario.electrolyzers:
        s += e.utility * outcome.h2_consumption[e.id]
    for g in scenario.generators:
        s -= g.mc * outcome.dispatch[g.id]
    return s


def compute_true_redispatch_cost(scenario: ScenarioData, rd: RedispatchOutcome,
                                 market: MarketOutcome) -> np.ndarray:
    """R_t: the operator's net cost of the adjustments, mark-up excluded."""
    T = scenario.horizon
    r = np.zeros(T)
    for d in scenario.demands:
        r += d.utility * (market.served[d.node] - rd.served[d.node])
    for e in scenario.electrolyzers:
        r += e.utility * (market.h2_consumption[e.id] - rd.h2_consumption[e.id])
    for g in scenario.generators:
        r += g.mc * (rd.dispatch[g.id] - market.dispatch[g.id])
    return r
