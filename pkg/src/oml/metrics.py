"""Evaluation quantities computed from solved designs.

Everything here is a pure function over a :class:`BilevelSolution` (or the
embedded outcomes): welfare decomposition, curtailment split between the
market stage and redispatch, wind-farm operating profit under cost-based
redispatch settlement, the electrolyzer zero-profit check, price statistics
and unique-price histograms, and CSV writers for the report files.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .bilevel import BilevelSolution, SubproblemSolution
from .scenario import ScenarioData

PRICE_CLUSTER_TOL = 1e-6
PROFIT_TOL = 1e-4


# ---------------------------------------------------------------------------
# welfare

@dataclass
class WelfareReport:
    design: str
    market_surplus: float       # sum_t S_t
    redispatch_cost: float      # sum_t R_t, mark-up excluded
    electrolyzer_cost: float    # EIC
    hvdc_cost: float            # TIC
    welfare: float
    base: float | None = None   # reference market surplus for normalization

    def normalized(self, value: float) -> float:
        return value / self.base if self.base else float("nan")


def welfare_report(scenario: ScenarioData, solution: BilevelSolution,
                   base: float | None = None) -> WelfareReport:
    sub = solution.subproblem
    s = float(np.sum(sub.market.surplus))
    r = float(np.sum(sub.redispatch.true_cost))
    eic = sum(e.unit_cost * sub.h2_capacity[e.id] for e in scenario.electrolyzers)
    tic = sum(h.unit_cost * solution.f_dc.get(h.id, 0.0)
              for h in scenario.network.dc_candidates)
    return WelfareReport(design=solution.design, market_surplus=s,
                         redispatch_cost=r, electrolyzer_cost=eic,
                         hvdc_cost=tic, welfare=s - r - eic - tic, base=base)


# ---------------------------------------------------------------------------
# curtailment

def curtailment_split(scenario: ScenarioData,
                      sub: SubproblemSolution) -> dict[str, float]:
    """Market-stage and redispatch-stage wind curtailment as fractions of
    the available wind energy over the horizon."""
    available = market_curt = rd_curt = 0.0
    for g in scenario.generators:
        if g.type != "wind":
            continue
        avail = g.cap * g.load_factor
        da = sub.market.dispatch[g.id]
        available += float(np.sum(avail))
        market_curt += float(np.sum(avail - da))
        rd_curt += float(np.sum(sub.redispatch.down["y"][g.id]
                                - sub.redispatch.up["y"][g.id]))
    if available <= 0.0:
        return {"market": 0.0, "redispatch": 0.0}
    return {"market": market_curt / available, "redispatch": rd_curt / available}


# ---------------------------------------------------------------------------
# profits

def wind_profit(scenario: ScenarioData,
                sub: SubproblemSolution) -> dict[str, float]:
    """Day-ahead revenue at the local price plus cost-based redispatch
    settlement.  Wind bids at zero marginal cost, so redispatch settlement
    moves money only through the MC term and leaves the margin intact."""
    out = {}
    for g in scenario.generators:
        if g.type != "wind":
            continue
        lam = sub.market.price_at_node(g.node)
        da = float(np.dot(lam, sub.market.dispatch[g.id]))
        settle = g.mc * float(np.sum(sub.redispatch.up["y"][g.id]
                                     - sub.redispatch.down["y"][g.id]))
        out[g.id] = da + settle
    return out


def electrolyzer_profit_check(scenario: ScenarioData,
                              sub: SubproblemSolution) -> dict[str, dict]:
    """Net profit = sum_t (utility - price) * consumption - investment;
    zero for interior capacity optima, possibly positive at the bound."""
    out = {}
    for e in scenario.electrolyzers:
        cap = sub.h2_capacity[e.id]
        lam = sub.market.price_at_node(e.node)
        margin = float(np.dot(e.utility - lam, sub.market.h2_consumption[e.id]))
        out[e.id] = {
            "capacity": cap,
            "net_profit": margin - e.unit_cost * cap,
            "at_upper_bound": abs(cap - e.max_cap) <= 1e-6,
        }
    return out


# ---------------------------------------------------------------------------
# prices

@dataclass
class PriceReport:
    design: str
    nodes: list[str]
    prices: np.ndarray          # (node, t)
    mean: float
    median: float
    q25: float
    q75: float
    histogram: dict[int, float]  # distinct-price count -> % of timesteps


def unique_price_histogram(prices: np.ndarray,
                           tol: float = PRICE_CLUSTER_TOL) -> dict[int, float]:
    """% of timesteps with k distinct prices; prices within ``tol`` of an
    already-seen value count as the same."""
    _, T = prices.shape
    counts = np.zeros(T, dtype=int)
    for t in range(T):
        reps: list[float] = []
        for p in sorted(prices[:, t]):
            if not reps or p - reps[-1] > tol:
                reps.append(p)
        counts[t] = len(reps)
    return {int(k): 100.0 * np.count_nonzero(counts == k) / T
            for k in sorted(set(counts))}


def price_stats(scenario: ScenarioData, sub: SubproblemSolution,
                nodes: list[str] | None = None,
                tol: float = PRICE_CLUSTER_TOL) -> PriceReport:
    if nodes is None:
        nodes = [n.id for n in scenario.network.nodes if n.offshore]
    mat = np.array([sub.market.price_at_node(n) for n in nodes])
    flat = mat.ravel()
    return PriceReport(
        design=sub.market.design, nodes=list(nodes), prices=mat,
        mean=float(np.mean(flat)), median=float(np.median(flat)),
        q25=float(np.percentile(flat, 25)), q75=float(np.percentile(flat, 75)),
        histogram=unique_price_histogram(mat, tol))


def correlation(a: np.ndarray, b: np.ndarray) -> float:
    """Pearson r over flattened samples; nan for a constant series."""
    a, b = np.ravel(a), np.ravel(b)
    if np.std(a) == 0.0 or np.std(b) == 0.0:
        return float("nan")
    return float(np.corrcoef(a, b)[0, 1])


# ---------------------------------------------------------------------------
# feasibility residuals (acceptance support)

def feasibility_residuals(scenario: ScenarioData,
                          sub: SubproblemSolution) -> dict[str, float]:
    """Worst physical violations of the redispatched (real-time) state:
    nodal balance residual and AC/DC flow-limit overshoot, in MW."""
    net = scenario.network
    T = scenario.horizon
    rd = sub.redispatch
    balance = 0.0
    for t in range(T):
        inj = {n.id: 0.0 for n in net.nodes}
        for g in scenario.generators:
            inj[g.node] += rd.dispatch[g.id][t]
        for d in scenario.demands:
            inj[d.node] -= rd.served[d.node][t]
        for e in scenario.electrolyzers:
            inj[e.node] -= rd.h2_consumption[e.id][t]
        for h in net.dc_candidates:
            inj[h.from_node] -= rd.dc_flows[h.id][t]
            inj[h.to_node] += rd.dc_flows[h.id][t]
        for l in net.ac_lines:
            inj[l.from_node] -= rd.ac_flows[l.id][t]
            inj[l.to_node] += rd.ac_flows[l.id][t]
        balance = max(balance, max(abs(v) for v in inj.values()))
    ac_over = max((float(np.max(np.abs(rd.ac_flows[l.id])) - l.thermal_cap)
                   for l in net.ac_lines), default=0.0)
    dc_over = max((float(np.max(np.abs(rd.dc_flows[h.id]))
                         - sub.f_hat.get(h.id, 0.0))
                   for h in net.dc_candidates), default=0.0)
    return {"balance": balance, "ac_flow": max(0.0, ac_over),
            "dc_flow": max(0.0, dc_over)}


# ---------------------------------------------------------------------------
# CSV writers

def _fmt(x) -> str:
    if isinstance(x, float):
        return f"{x:.6f}"
    return str(x)


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(x) for x in row])


def write_reports(out_dir: str, scenario: ScenarioData,
                  cells: list[tuple[str, str, BilevelSolution]],
                  base_surplus: float | None = None) -> list[str]:
    """Write the seven report CSVs for a (design, cost_level) sweep.

    ``cells`` holds (design, cost_level, solution) in the order the rows
    should appear.  Returns the written paths.
    """
    import os
    welfare_rows, hvdc_rows, h2_rows, profit_rows = [], [], [], []
    curt_rows, price_rows, uniq_rows = [], [], []
    for design, level, sol in cells:
        sub = sol.subproblem
        wr = welfare_report(scenario, sol, base_surplus)
        welfare_rows.append([design, level, wr.market_surplus,
                             wr.redispatch_cost, wr.electrolyzer_cost,
                             wr.hvdc_cost, wr.welfare])
        for h in scenario.network.dc_candidates:
            hvdc_rows.append([design, level, h.id, sol.f_dc.get(h.id, 0.0),
                              h.unit_cost * sol.f_dc.get(h.id, 0.0)])
        for e_id, rec in electrolyzer_profit_check(scenario, sub).items():
            h2_rows.append([design, level, e_id, rec["capacity"],
                            rec["net_profit"], int(rec["at_upper_bound"])])
        for g_id, profit in wind_profit(scenario, sub).items():
            profit_rows.append([design, level, g_id, profit])
        split = curtailment_split(scenario, sub)
        curt_rows.append([design, level, split["market"], split["redispatch"],
                          split["market"] + split["redispatch"]])
        pr = price_stats(scenario, sub)
        for i, n in enumerate(pr.nodes):
            for t in range(scenario.horizon):
                price_rows.append([design, level, n, t, pr.prices[i, t]])
        for k, pct in pr.histogram.items():
            uniq_rows.append([design, level, k, pct])

    files = {
        "welfare.csv": (["design", "cost_level", "market_surplus",
                         "redispatch_cost", "electrolyzer_cost", "hvdc_cost",
                         "welfare"], welfare_rows),
        "hvdc.csv": (["design", "cost_level", "line", "capacity_mw",
                      "investment_cost"], hvdc_rows),
        "electrolyzer.csv": (["design", "cost_level", "electrolyzer",
                              "capacity_mw", "net_profit", "at_upper_bound"],
                             h2_rows),
        "profit.csv": (["design", "cost_level", "wind_farm", "profit"],
                       profit_rows),
        "curtailment.csv": (["design", "cost_level", "market_share",
                             "redispatch_share", "total_share"], curt_rows),
        "prices.csv": (["design", "cost_level", "node", "t", "price"],
                       price_rows),
        "unique_prices.csv": (["design", "cost_level", "distinct_prices",
                               "pct_of_timesteps"], uniq_rows),
    }
    written = []
    for name, (header, rows) in files.items():
        path = os.path.join(out_dir, name)
        _write_csv(path, header, rows)
        written.append(path)
    return written
