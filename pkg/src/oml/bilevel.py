"""Bilevel solve: HVDC sizing by Benders decomposition over MPEC subproblems.

The investor chooses HVDC capacities f̄.  For fixed capacities the response
is a two-stage equilibrium: day-ahead clearing with electrolyzer sizing
(LL1), then per-timestep cost-based redispatch (LL2).  The subproblem value
v(f̄) — operational welfare net of electrolyzer investment, HVDC cost
excluded — and a sensitivity Λ = dv/df̄ feed cuts to a small master LP.

The subproblem is solved in three steps:

1. LL1 as a plain LP; record its value and an optimal electrolyzer
   capacity.  With that capacity fixed LL1 decouples over time, so each
   timestep's surplus from the joint solve is the timestep optimum.
2. Per timestep, a MILP picks the welfare-best equilibrium: LL1 optimality
   is imposed through its value function (surplus >= step optimum, no
   binaries needed), LL2 optimality through KKT conditions with big-M
   complementarity binaries.
3. One joint LP re-solves the full KKT system of both levels with the
   complementarity pattern of step 2 imposed as equalities; the duals of
   the capacity-fixing rows are the sensitivities Λ.

``build_kkt_milp`` also assembles the single monolithic KKT MILP over the
whole horizon (both levels' KKT systems with binaries); it is exact but
only tractable for small instances and serves as a cross-check.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .market import (ClearingStage, RedispatchStage, Row, StageLp,
                     build_clearing_stage, build_redispatch_stage,
                     extract_market_outcome, extract_redispatch_outcome,
                     stage_to_problem, substitute, v_dccap, v_h2cap,
                     MarketOutcome, RedispatchOutcome)
from .network import PtdfSet, Zoning
from .scenario import ScenarioData
from .solver import (INF, LpProblem, MilpProblem, SolverError, solve_lp,
                     solve_milp)

ACTIVE_TOL = 1e-6          # binding threshold when reading a pattern
VALUE_MATCH_RTOL = 1e-6    # sensitivity LP must reproduce the MILP value
BIG_M_ESCALATION = 10.0
BIG_M_MAX_ROUNDS = 3
DUAL_SAFETY = 1e-3         # duals within (1-this)*M trigger escalation


class SubproblemError(SolverError):
    """The MPEC subproblem could not be solved to the required consistency."""


# ---------------------------------------------------------------------------
# KKT building blocks

def dual_name(row_name: str) -> str:
    return f"mu[{row_name}]"


def stat_name(var_name: str) -> str:
    return f"stat[{var_name}]"


def bin_name(row_name: str) -> str:
    return f"u[{row_name}]"


@dataclass
class KktSystem:
    """KKT conditions of one stage LP, rows only (no variables declared).

    ``primal_rows`` are the stage rows after substitution, ``stationarity``
    one equality per own variable (foreign variables are parameters to the
    stage and get no stationarity row), ``comp`` the inequality rows whose
    dual must be complementary to the slack, with interval-arithmetic slack
    bounds for big-M formulations.
    """
    own_vars: list[str]
    dual_vars: dict[str, str]          # row name -> dual var name
    eq_rows: list[str]
    primal_rows: list[Row]
    stationarity: list[Row]
    comp: list[tuple[Row, str, float]]  # (row, dual var, slack bound)


def slack_bound(row: Row, ranges: dict[str, tuple[float, float]]) -> float:
    """Upper bound on b - a'x over the variable box."""
    lo_activity = 0.0
    for vn, c in row.coeffs.items():
        if vn not in ranges:
            raise SubproblemError(f"no range for {vn} in row {row.name}")
        lo, hi = ranges[vn]
        lo_activity += min(c * lo, c * hi)
    return row.rhs - lo_activity


def build_kkt(stage: StageLp, fixed: dict[str, float],
              ranges: dict[str, tuple[float, float]]) -> KktSystem:
    rows = substitute(stage.rows, fixed)
    sgn = -1.0 if stage.sense == "max" else 1.0
    own = [v for v in stage.own_vars if v not in fixed]
    own_set = set(own)

    # stationarity: c + sgn * sum_r a_r mu_r = 0 per own variable
    # (for a max stage this is c - A'mu = 0 with mu >= 0 on <= rows)
    stat = {v: {} for v in own}
    dual_vars, eq_rows, comp = {}, [], []
    for row in rows:
        dn = dual_name(row.name)
        dual_vars[row.name] = dn
        for vn, c in row.coeffs.items():
            if vn in own_set:
                stat[vn][dn] = stat[vn].get(dn, 0.0) + sgn * c
        if row.sense == "=":
            eq_rows.append(row.name)
        else:
            comp.append((row, dn, slack_bound(row, ranges)))
    stat_rows = [Row(stat_name(vn), dict(stat[vn]), "=",
                     -stage.objective.get(vn, 0.0)) for vn in own]
    return KktSystem(own, dual_vars, eq_rows, rows, stat_rows, comp)


def combined_ranges(scenario: ScenarioData, *stages: StageLp) -> dict:
    ranges = {}
    for st in stages:
        ranges.update(st.ranges)
    for h in scenario.network.dc_candidates:
        ranges[v_dccap(h.id)] = (0.0, h.max_cap)
    return ranges


def default_dual_bound(scenario: ScenarioData) -> float:
    """All LL duals are prices or congestion rents; the most expensive
    single action is shedding at mark-up plus willingness to pay, and
    congestion duals stack a couple of those, hence the factor."""
    u = max((d.utility for d in scenario.demands), default=0.0)
    uh2 = max((float(np.max(e.utility)) for e in scenario.electrolyzers), default=0.0)
    return 2.0 * (scenario.redispatch_markup
                  + max(u, uh2, scenario.max_marginal_cost()))


def _add_kkt_to_milp(prob: MilpProblem, kkt: KktSystem, dual_bound: float):
    """Declare dual variables, binaries and big-M complementarity rows for a
    stage whose primal rows are assumed added by the caller."""
    for row_name in kkt.eq_rows:
        prob.add_var(kkt.dual_vars[row_name])
    for row, dn, _ in kkt.comp:
        prob.add_var(dn, lb=0.0, ub=dual_bound)
    for srow in kkt.stationarity:
        prob.add_constraint(srow.name, srow.coeffs, "=", srow.rhs)
    for row, dn, ms in kkt.comp:
        un = bin_name(row.name)
        prob.add_var(un, lb=0.0, ub=1.0, integer=True)
        # slack <= M(1-u):  b - a'x + M u <= M
        coeffs = {vn: -c for vn, c in row.coeffs.items()}
        coeffs[un] = ms
        prob.add_constraint(f"cs_p[{row.name}]", coeffs, "<=", ms - row.rhs)
        # dual <= M u
        prob.add_constraint(f"cs_d[{row.name}]", {dn: 1.0, un: -dual_bound}, "<=", 0.0)


def _declare_primal(prob: LpProblem, own_vars, ranges, declared: set[str]):
    for vn in own_vars:
        if vn not in declared:
            lo, hi = ranges[vn]
            prob.add_var(vn, lb=lo, ub=hi)
            declared.add(vn)


# ---------------------------------------------------------------------------
# faithful monolithic KKT MILP (tractable for small instances)

def build_kkt_milp(scenario: ScenarioData, zoning: Zoning, ptdfs: PtdfSet,
                   f_hat: dict[str, float],
                   dual_bound: float | None = None) -> tuple[MilpProblem, ClearingStage]:
    """One MILP holding both levels' KKT systems at fixed HVDC capacities.

    The objective is operational welfare net of electrolyzer investment
    (true redispatch cost, mark-up excluded), so among equilibria the
    welfare-best one is selected.
    """
    clearing = build_clearing_stage(scenario, zoning, ptdfs)
    rd_stages = [build_redispatch_stage(scenario, ptdfs, t)
                 for t in range(scenario.horizon)]
    ranges = combined_ranges(scenario, clearing.stage, *(r.stage for r in rd_stages))
    dual_bound = dual_bound or default_dual_bound(scenario)

    prob = MilpProblem(name=f"kkt_milp[{zoning.design}]", sense="max")
    declared: set[str] = set()
    for h in scenario.network.dc_candidates:
        vn = v_dccap(h.id)
        prob.add_var(vn, lb=0.0, ub=h.max_cap)
        declared.add(vn)
        prob.add_constraint(f"fixdc[{h.id}]", {vn: 1.0}, "=", float(f_hat.get(h.id, 0.0)))

    obj: dict[str, float] = {}
    kkt1 = build_kkt(clearing.stage, {}, ranges)
    _declare_primal(prob, kkt1.own_vars, ranges, declared)
    for row in kkt1.primal_rows:
        prob.add_constraint(row.name, row.coeffs, row.sense, row.rhs)
    _add_kkt_to_milp(prob, kkt1, dual_bound)
    for t in range(scenario.horizon):
        for vn, c in clearing.surplus_expr(scenario, t).items():
            obj[vn] = obj.get(vn, 0.0) + c
    for e in scenario.electrolyzers:
        obj[v_h2cap(e.id)] = obj.get(v_h2cap(e.id), 0.0) - e.unit_cost

    for rd in rd_stages:
        kkt2 = build_kkt(rd.stage, {}, ranges)
        _declare_primal(prob, kkt2.own_vars, ranges, declared)
        for row in kkt2.primal_rows:
            prob.add_constraint(row.name, row.coeffs, row.sense, row.rhs)
        _add_kkt_to_milp(prob, kkt2, dual_bound)
        for vn, c in rd.true_cost_expr(scenario, rd.t).items():
            obj[vn] = obj.get(vn, 0.0) - c

    prob.objective = obj
    return prob, clearing


# ---------------------------------------------------------------------------
# decomposed subproblem

def _rows_for_t(rows: list[Row], t: int) -> list[Row]:
    suffix = f",{t}]"
    return [r for r in rows if r.name.endswith(suffix)]


def _vars_for_t(own_vars: list[str], t: int) -> list[str]:
    suffix = f",{t}]"
    return [v for v in own_vars if v.endswith(suffix)]


@dataclass
class SubproblemSolution:
    value: float                       # sum_t (S_t - R_t) - electrolyzer cost
    sensitivity: dict[str, float]      # dv/df per DC candidate
    market: MarketOutcome
    redispatch: RedispatchOutcome
    h2_capacity: dict[str, float]
    per_t_value: np.ndarray
    dual_bound: float
    f_hat: dict[str, float]
    max_dual: float = 0.0      # largest complementarity dual seen (big-M audit)


def _clearing_lp(scenario, clearing, f_hat):
    fixed = {v_dccap(h.id): float(f_hat.get(h.id, 0.0))
             for h in scenario.network.dc_candidates}
    prob = stage_to_problem(clearing.stage, fixed)
    res = solve_lp(prob)
    if res.status != "optimal":
        raise SubproblemError(f"clearing LP {res.status} at f={f_hat}")
    return res


def _per_t_milp(scenario, clearing, rd, t, fixed, v1_t, ranges, dual_bound,
                face_rows=frozenset()):
    """Equilibrium selection at one timestep: LL1 feasibility plus value-
    function optimality, LL2 KKT with big-M binaries; maximize S_t - R_t.

    ``face_rows`` are the clearing rows carrying a dual in the clearing LP;
    holding them at equality pins the selection exactly onto the clearing
    optimal face (complementary slackness: every optimal point binds them),
    so the value row's slack cannot be traded for redispatch savings.
    """
    prob = MilpProblem(name=f"sub[{t}]", sense="max")
    declared: set[str] = set()
    ll1_rows = _rows_for_t(substitute(clearing.stage.rows, fixed), t)
    ll1_vars = _vars_for_t(clearing.stage.own_vars, t)
    _declare_primal(prob, ll1_vars, ranges, declared)
    for row in ll1_rows:
        sense = "=" if row.name in face_rows else row.sense
        prob.add_constraint(row.name, row.coeffs, sense, row.rhs)
    s_expr = {vn: c for vn, c in clearing.surplus_expr(scenario, t).items()
              if vn not in fixed}
    # slack covers LP-accuracy noise in v1_t only; anything larger would let
    # the selection objective trade clearing surplus for redispatch savings
    # and leave the optimal face of the clearing LP
    vtol = max(1e-9 * abs(v1_t), 1e-6)
    prob.add_constraint(f"ll1opt[{t}]", {vn: -c for vn, c in s_expr.items()},
                        "<=", -(v1_t - vtol))

    kkt2 = build_kkt(rd.stage, fixed, ranges)
    _declare_primal(prob, kkt2.own_vars, ranges, declared)
    for row in kkt2.primal_rows:
        prob.add_constraint(row.name, row.coeffs, row.sense, row.rhs)
    _add_kkt_to_milp(prob, kkt2, dual_bound)

    obj = dict(s_expr)
    for vn, c in rd.true_cost_expr(scenario, t).items():
        obj[vn] = obj.get(vn, 0.0) - c
    prob.objective = obj
    res = solve_milp(prob)
    if res.status != "optimal":
        raise SubproblemError(f"subproblem MILP {res.status} at t={t}")
    return prob, res


def _partner(name: str) -> str:
    if "_lo[" in name:
        return name.replace("_lo[", "_up[", 1)
    if "_up[" in name:
        return name.replace("_up[", "_lo[", 1)
    return ""


def _binding_pattern(rows, primal, tol=ACTIVE_TOL, strict_tol=None):
    """Classify inequality rows at a primal point.

    'active' rows are held at equality in the sensitivity LP, 'inactive'
    rows get a zero dual, 'paired' rows stay inequalities with a free dual.
    Paired status applies when both rows of an opposing lower/upper pair
    bind (a capacity pinched to zero): holding both at equality would pin
    the variable under right-hand-side perturbations and destroy the
    one-sided sensitivity, while the rest of the active set still pins the
    nominal point.  With ``strict_tol`` set, rows binding only loosely are
    paired as well, which resolves tiny conflicts between near-binding
    rows that an exact equality system cannot satisfy simultaneously.
    """
    slack = {}
    for row in rows:
        if row.sense == "=":
            continue
        act = sum(c * primal.get(vn, 0.0) for vn, c in row.coeffs.items())
        slack[row.name] = (row.rhs - act) / max(1.0, abs(row.rhs))
    pattern = {}
    for name, s in slack.items():
        if s > tol:
            pattern[name] = "inactive"
        elif slack.get(_partner(name), np.inf) <= tol:
            pattern[name] = "paired"
        elif strict_tol is not None and s > strict_tol:
            pattern[name] = "paired"
        else:
            pattern[name] = "active"
    return pattern


def _sensitivity_lp(scenario, clearing, rd_stages, f_hat, ranges, pattern):
    """Joint KKT system of both levels as an LP: the complementarity pattern
    is imposed by forcing active rows to equality and inactive duals to
    zero.  Duals of the capacity-fixing rows are the sensitivities."""
    prob = LpProblem(name="sens_lp", sense="max")
    declared: set[str] = set()
    for h in scenario.network.dc_candidates:
        vn = v_dccap(h.id)
        prob.add_var(vn, lb=0.0, ub=h.max_cap)
        declared.add(vn)
        prob.add_constraint(f"fixdc[{h.id}]", {vn: 1.0}, "=", float(f_hat.get(h.id, 0.0)))

    obj: dict[str, float] = {}

    def add_stage(kkt: KktSystem):
        _declare_primal(prob, kkt.own_vars, ranges, declared)
        for row in kkt.primal_rows:
            if row.sense != "=" and pattern.get(row.name) == "active":
                prob.add_constraint(row.name, row.coeffs, "=", row.rhs)
            else:
                prob.add_constraint(row.name, row.coeffs, row.sense, row.rhs)
        for row_name in kkt.eq_rows:
            prob.add_var(kkt.dual_vars[row_name])
        for row, dn, _ in kkt.comp:
            closed = pattern.get(row.name, "inactive") != "inactive"
            prob.add_var(dn, lb=0.0, ub=INF if closed else 0.0)
        for srow in kkt.stationarity:
            prob.add_constraint(srow.name, srow.coeffs, "=", srow.rhs)

    add_stage(build_kkt(clearing.stage, {}, ranges))
    for t in range(scenario.horizon):
        for vn, c in clearing.surplus_expr(scenario, t).items():
            obj[vn] = obj.get(vn, 0.0) + c
    for e in scenario.electrolyzers:
        obj[v_h2cap(e.id)] = obj.get(v_h2cap(e.id), 0.0) - e.unit_cost
    for rd in rd_stages:
        add_stage(build_kkt(rd.stage, {}, ranges))
        for vn, c in rd.true_cost_expr(scenario, rd.t).items():
            obj[vn] = obj.get(vn, 0.0) - c
    prob.objective = obj
    return prob


def _stable_sensitivity(scenario, clearing, rd_stages, f_hat, ranges, pattern,
                        target, max_rounds=8):
    """Solve the patterned KKT LP, then iteratively release forced-equality
    rows whose own dual is zero (degenerate actives).  Those rows carry no
    force at the nominal point but would pin the solution under capacity
    perturbations and destroy the one-sided sensitivities — e.g. everything
    clamped at zero when a line capacity is zero.  Each relaxation round
    must keep the nominal objective at the subproblem value; otherwise the
    previous solve is kept."""
    pattern = dict(pattern)
    best = None
    scale = max(1.0, abs(target))
    for _ in range(max_rounds):
        sens = solve_lp(_sensitivity_lp(scenario, clearing, rd_stages,
                                        f_hat, ranges, pattern))
        if sens.status != "optimal" or \
                abs(sens.objective - target) > max(VALUE_MATCH_RTOL * scale, 1e-4):
            return best
        best = sens
        released = 0
        for name, state in pattern.items():
            if state == "active" and abs(sens.duals.get(name, 0.0)) <= 1e-7 * scale:
                pattern[name] = "paired"
                released += 1
        if released == 0:
            return best
    return best


def _certificate_pattern(clearing, ll1, kkt2s, point):
    """Complementarity pattern from exact optimality certificates instead
    of slack classification at the MILP point.

    The per-timestep MILPs hold clearing optimality only within a small
    value slack, so their point can drift just off the optimal face and
    its binding pattern then contradicts every exact clearing dual (the
    patterned sensitivity LP comes back infeasible on the stationarity
    side).  Certificates avoid the point entirely: by complementary
    slackness, holding exactly the rows carrying a dual in the clearing LP
    at equality describes the optimal face exactly, and the selection
    MILP's own complementarity binaries give the redispatch pattern.
    """
    pattern = {}
    for row in clearing.stage.rows:
        if row.sense != "=":
            pattern[row.name] = ("active"
                                 if abs(ll1.duals.get(row.name, 0.0)) > 1e-7
                                 else "paired")
    for kkt2 in kkt2s:
        closed = {row.name: point.get(bin_name(row.name), 0.0) > 0.5
                  for row, _, _ in kkt2.comp}
        for row, _, _ in kkt2.comp:
            if closed[row.name]:
                pattern[row.name] = ("paired" if closed.get(_partner(row.name))
                                     else "active")
            else:
                pattern[row.name] = "inactive"
    return pattern


def solve_subproblem(scenario: ScenarioData, zoning: Zoning, ptdfs: PtdfSet,
                     f_hat: dict[str, float],
                     dual_bound: float | None = None) -> SubproblemSolution:
    clearing = build_clearing_stage(scenario, zoning, ptdfs)
    rd_stages = [build_redispatch_stage(scenario, ptdfs, t)
                 for t in range(scenario.horizon)]
    ranges = combined_ranges(scenario, clearing.stage, *(r.stage for r in rd_stages))
    bound = dual_bound or default_dual_bound(scenario)

    ll1 = _clearing_lp(scenario, clearing, f_hat)
    caps = {e.id: ll1.primal[v_h2cap(e.id)] for e in scenario.electrolyzers}
    inv_cost = sum(e.unit_cost * caps[e.id] for e in scenario.electrolyzers)
    v1_t = [ll1.value(clearing.surplus_expr(scenario, t))
            for t in range(scenario.horizon)]

    fixed = {v_dccap(h.id): float(f_hat.get(h.id, 0.0))
             for h in scenario.network.dc_candidates}
    fixed.update({v_h2cap(e.id): caps[e.id] for e in scenario.electrolyzers})
    face_rows = frozenset(name for name, d in ll1.duals.items()
                          if abs(d) > 1e-7)

    for attempt in range(BIG_M_MAX_ROUNDS):
        per_t_value = np.zeros(scenario.horizon)
        all_rows: list[Row] = []
        point: dict[str, float] = dict(fixed)
        comp_duals: set[str] = set()
        kkt2s: list[KktSystem] = []
        try:
            for t in range(scenario.horizon):
                prob, res = _per_t_milp(scenario, clearing, rd_stages[t], t,
                                        fixed, v1_t[t], ranges, bound,
                                        face_rows)
                per_t_value[t] = res.objective
                point.update(res.primal)
                kkt2 = build_kkt(rd_stages[t].stage, fixed, ranges)
                kkt2s.append(kkt2)
                comp_duals.update(dn for _, dn, _ in kkt2.comp)
                all_rows.extend(
                    _rows_for_t(substitute(clearing.stage.rows, fixed), t)
                    + kkt2.primal_rows)
        except SubproblemError:
            # infeasibility usually means the dual bound cut off the
            # complementarity pattern of the true optimum
            if attempt + 1 >= BIG_M_MAX_ROUNDS:
                raise
            bound *= BIG_M_ESCALATION
            continue

        milp_value = float(np.sum(per_t_value)) - inv_cost
        # global (time-independent) clearing rows: sizing bounds
        all_rows.extend(r for r in clearing.stage.rows
                        if not any(r.name.endswith(f",{t}]")
                                   for t in range(scenario.horizon)))
        sens = None
        for strict in (None, 1e-9):
            pattern = _binding_pattern(all_rows, point, strict_tol=strict)
            sens = _stable_sensitivity(scenario, clearing, rd_stages, f_hat,
                                       ranges, pattern, milp_value)
            if sens is not None:
                break
        if sens is None:
            pattern = _certificate_pattern(clearing, ll1, kkt2s, point)
            sens = _stable_sensitivity(scenario, clearing, rd_stages, f_hat,
                                       ranges, pattern, milp_value)
        if sens is None:
            # one retry with the pattern read from the plain-LP path
            sens = _retry_with_lp_pattern(scenario, clearing, rd_stages,
                                          f_hat, fixed, ranges, ll1,
                                          milp_value)
        if sens is not None:
            # sensitivity duals near the big-M ceiling suggest the MILP's
            # dual bound may have forced a suboptimal pattern
            maxmu = max((abs(sens.primal.get(dn, 0.0)) for dn in comp_duals),
                        default=0.0)
            if (maxmu < (1.0 - DUAL_SAFETY) * bound
                    or attempt + 1 >= BIG_M_MAX_ROUNDS):
                return _package(scenario, clearing, point, sens,
                                f_hat, per_t_value, bound, maxmu)
        elif attempt + 1 >= BIG_M_MAX_ROUNDS:
            raise SubproblemError(
                f"sensitivity LP does not reproduce the subproblem value "
                f"({milp_value}) at f={f_hat}")
        bound *= BIG_M_ESCALATION
    raise SubproblemError("big-M escalation exhausted")


def _retry_with_lp_pattern(scenario, clearing, rd_stages, f_hat, fixed,
                           ranges, ll1, target):
    pattern = _binding_pattern(substitute(clearing.stage.rows, {}),
                               {**ll1.primal, **fixed})
    rd_fixed = dict(fixed)
    rd_fixed.update({vn: val for vn, val in ll1.primal.items()})
    for rd in rd_stages:
        prob = stage_to_problem(rd.stage, rd_fixed)
        res = solve_lp(prob)
        if res.status != "optimal":
            return None
        pattern.update(_binding_pattern(substitute(rd.stage.rows, rd_fixed),
                                        res.primal))
    return _stable_sensitivity(scenario, clearing, rd_stages, f_hat, ranges,
                               pattern, target)


def _package(scenario, clearing, point, sens, f_hat, per_t_value,
             bound, max_dual) -> SubproblemSolution:
    """Report quantities from the MILP point (which satisfies both levels'
    optimality exactly) and prices/sensitivities from the KKT LP."""
    from .market import balance_row
    T = scenario.horizon
    # prices are the LL1 balance duals, i.e. primal values of the dual
    # variables in the joint KKT LP (price = -d(max welfare)/d(rhs))
    prices = {}
    for unit in clearing.pricing_units:
        prices[unit] = np.array(
            [-sens.primal[dual_name(balance_row(unit, t))] for t in range(T)])
    market = extract_market_outcome(scenario, clearing, point, None)
    market.prices = prices
    rd = extract_redispatch_outcome(scenario, market, [point] * T)
    # extra capacity never hurts (flows are bounded by it, not forced), so the
    # value function is nondecreasing and any negative marginal is an artifact
    # of degenerate complementarity patterns; clamping keeps the cut valid
    lam = {h.id: max(0.0, float(sens.duals[f"fixdc[{h.id}]"]))
           for h in scenario.network.dc_candidates}
    # the MILP value carries up to the value-row slack of LL1 drift; the
    # sensitivity LP satisfies LL1's KKT exactly, so its objective is the
    # equilibrium value (the two agree within the guard tolerance)
    return SubproblemSolution(
        value=float(sens.objective), sensitivity=lam, market=market, redispatch=rd,
        h2_capacity=dict(market.h2_capacity), per_t_value=per_t_value,
        dual_bound=bound, f_hat=dict(f_hat), max_dual=float(max_dual))


# ---------------------------------------------------------------------------
# Benders loop

@dataclass
class BendersCut:
    value: float
    f_hat: dict[str, float]
    sensitivity: dict[str, float]


@dataclass
class IterationRecord:
    iteration: int
    f_hat: dict[str, float]
    subproblem_value: float
    lower_bound: float
    upper_bound: float
    gap: float
    seconds: float


@dataclass
class BilevelSolution:
    design: str
    f_dc: dict[str, float]
    objective: float               # welfare including HVDC investment cost
    lower_bound: float
    upper_bound: float
    gap: float
    converged: bool
    iterations: list[IterationRecord]
    subproblem: SubproblemSolution


def solve_master(scenario: ScenarioData, cuts: list[BendersCut],
                 incumbent: dict[str, float] | None = None,
                 lb: float = -INF) -> tuple[dict[str, float], float]:
    """max alpha - sum_h C_h f_h subject to the Benders cuts.

    The bound is the unrestricted maximum; the returned query point is
    stabilized (level method): the point closest in L1 to the incumbent whose
    model value still reaches lb + half the remaining gap.  Without an
    incumbent this degenerates to the cheapest build attaining the maximum.
    """
    net = scenario.network
    prob = LpProblem(name="master", sense="max")
    for h in net.dc_candidates:
        prob.add_var(f"f[{h.id}]", lb=0.0, ub=h.max_cap)
    prob.add_var("alpha")
    prob.objective = {"alpha": 1.0}
    for h in net.dc_candidates:
        prob.objective[f"f[{h.id}]"] = -h.unit_cost
    for i, cut in enumerate(cuts):
        coeffs = {"alpha": 1.0}
        rhs = cut.value
        for h in net.dc_candidates:
            lam = cut.sensitivity.get(h.id, 0.0)
            coeffs[f"f[{h.id}]"] = -lam
            rhs -= lam * cut.f_hat.get(h.id, 0.0)
        prob.add_constraint(f"cut[{i}]", coeffs, "<=", rhs)
    res = solve_lp(prob)
    if res.status != "optimal":
        raise SubproblemError(f"master LP {res.status}")
    obj = res.objective
    if incumbent is not None and lb > -INF:
        level = lb + 0.5 * (obj - lb)
    else:
        # tie-break: cheapest build achieving (numerically) the same objective
        incumbent = {h.id: 0.0 for h in net.dc_candidates}
        level = obj - 1e-7 * max(1.0, abs(obj))
    tie = LpProblem(name="master_tiebreak", sense="min")
    for h in net.dc_candidates:
        tie.add_var(f"f[{h.id}]", lb=0.0, ub=h.max_cap)
        tie.add_var(f"dev[{h.id}]", lb=0.0)
    tie.add_var("alpha")
    tie.objective = {f"dev[{h.id}]": 1.0 for h in net.dc_candidates}
    for c in prob.constraints:
        tie.add_constraint(c.name, c.coeffs, c.sense, c.rhs)
    for h in net.dc_candidates:
        base = incumbent.get(h.id, 0.0)
        tie.add_constraint(f"dev_up[{h.id}]",
                           {f"dev[{h.id}]": 1.0, f"f[{h.id}]": -1.0}, ">=", -base)
        tie.add_constraint(f"dev_dn[{h.id}]",
                           {f"dev[{h.id}]": 1.0, f"f[{h.id}]": 1.0}, ">=", base)
    floor = {"alpha": 1.0}
    floor.update({f"f[{h.id}]": -h.unit_cost for h in net.dc_candidates})
    tie.add_constraint("obj_floor", floor, ">=", level)
    res2 = solve_lp(tie)
    pick = res2 if res2.status == "optimal" else res
    f_next = {h.id: float(pick.primal[f"f[{h.id}]"]) for h in net.dc_candidates}
    return f_next, float(obj)


def solve_bilevel(scenario: ScenarioData, zoning: Zoning, ptdfs: PtdfSet,
                  log=None) -> BilevelSolution:
    """Benders loop: evaluate the subproblem, add a cut, re-solve the
    master, until the bound gap closes."""
    settings = scenario.benders
    net = scenario.network
    cuts: list[BendersCut] = []
    records: list[IterationRecord] = []
    f_hat = {h.id: 0.0 for h in net.dc_candidates}
    lb, best = -INF, None
    ub = INF
    dual_bound = None
    for it in range(1, settings.max_iterations + 1):
        t0 = time.perf_counter()
        sub = solve_subproblem(scenario, zoning, ptdfs, f_hat, dual_bound)
        dual_bound = sub.dual_bound  # keep any escalation for later iterations
        tic = sum(h.unit_cost * f_hat[h.id] for h in net.dc_candidates)
        total = sub.value - tic
        if total > lb:
            lb, best = total, sub
        cuts.append(BendersCut(sub.value, dict(f_hat), sub.sensitivity))
        f_next, ub = solve_master(scenario, cuts,
                                  incumbent=best.f_hat if best else None, lb=lb)
        gap = ub - lb
        rec = IterationRecord(it, dict(f_hat), sub.value, lb, ub, gap,
                              time.perf_counter() - t0)
        records.append(rec)
        if log is not None:
            log(rec)
        if gap <= settings.tolerance:
            break
        f_hat = f_next
    else:
        return BilevelSolution(zoning.design, dict(best.f_hat), lb, lb, ub,
                               ub - lb, False, records, best)
    return BilevelSolution(zoning.design, dict(best.f_hat), lb, lb, ub,
                           ub - lb, True, records, best)


def write_convergence_log(path: str, design: str, records: list[IterationRecord],
                          dc_ids: list[str]):
    import csv
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["design", "iteration"] + [f"f_{h}" for h in dc_ids]
                   + ["subproblem_value", "lower_bound", "upper_bound", "gap", "seconds"])
        for r in records:
            w.writerow([design, r.iteration]
                       + [f"{r.f_hat.get(h, 0.0):.6f}" for h in dc_ids]
                       + [f"{r.subproblem_value:.6f}", f"{r.lower_bound:.6f}",
                          f"{r.upper_bound:.6f}", f"{r.gap:.6f}", f"{r.seconds:.3f}"])
