"""Backend-neutral LP/MILP layer.

Problems are stated in a sparse, name-based form and handed to a solver
adapter.  The rest of the package never imports an optimization engine
directly; the adapter is selected through the OML_SOLVER environment
variable (default: "scipy", which uses scipy.optimize / HiGHS).

Dual convention: for every constraint, ``duals[name]`` is the derivative
of the optimal objective *in the problem's own sense* with respect to the
constraint's right-hand side.  For ``max x s.t. x <= 5`` the dual of the
upper bound is +1.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.optimize import LinearConstraint, linprog, milp

INF = math.inf

STATUS_OPTIMAL = "optimal"
STATUS_INFEASIBLE = "infeasible"
STATUS_UNBOUNDED = "unbounded"
STATUS_LIMIT = "limit"

# Feasibility / gap targets.  Subproblem values feed Benders cuts, so the
# MILP gap is kept tight.
FEASIBILITY_TOL = 1e-6
MILP_REL_GAP = 1e-6


class SolverError(Exception):
    """A backend failed or returned something unusable."""


@dataclass
class Variable:
    name: str
    lb: float = -INF
    ub: float = INF
    integer: bool = False


@dataclass
class Constraint:
    name: str
    coeffs: dict[str, float]
    sense: str  # "<=", ">=", "="
    rhs: float


@dataclass
class LpProblem:
    name: str = "lp"
    variables: list[Variable] = field(default_factory=list)
    constraints: list[Constraint] = field(default_factory=list)
    objective: dict[str, float] = field(default_factory=dict)
    obj_const: float = 0.0
    sense: str = "max"

    def add_var(self, name, lb=-INF, ub=INF, integer=False):
        self.variables.append(Variable(name, lb, ub, integer))
        return name

    def add_constraint(self, name, coeffs, sense, rhs):
        self.constraints.append(Constraint(name, dict(coeffs), sense, rhs))
        return name

    def validate(self):
        seen = set()
        for v in self.variables:
            if v.name in seen:
                raise SolverError(f"duplicate variable id: {v.name}")
            seen.add(v.name)
        for c in self.constraints:
            if c.sense not in ("<=", ">=", "="):
                raise SolverError(f"bad sense {c.sense!r} in {c.name}")
            for vn in c.coeffs:
                if vn not in seen:
                    raise SolverError(f"constraint {c.name} references unknown variable {vn}")
        for vn in self.objective:
            if vn not in seen:
                raise SolverError(f"objective references unknown variable {vn}")


class MilpProblem(LpProblem):
    """An LpProblem in which some variables carry integrality flags."""


@dataclass
class SolveResult:
    status: str
    objective: float | None
    primal: dict[str, float]
    duals: dict[str, float]            # per constraint, LPs only
    lb_duals: dict[str, float]         # per variable lower bound, LPs only
    ub_duals: dict[str, float]         # per variable upper bound, LPs only
    backend_log: str = ""

    def value(self, expr: dict[str, float], const: float = 0.0) -> float:
        return const + sum(c * self.primal[v] for v, c in expr.items())


def _index(problem):
    idx = {v.name: i for i, v in enumerate(problem.variables)}
    return idx


class _CooBlock:
    """Sparse constraint block accumulated in COO form."""

    def __init__(self):
        self.rows, self.cols, self.vals = [], [], []
        self.rhs, self.names = [], []

    def add(self, name, coeffs, idx, rhs, flip):
        r = len(self.rhs)
        s = -1.0 if flip else 1.0
        for vn, coef in coeffs.items():
            if coef != 0.0:
                self.rows.append(r)
                self.cols.append(idx[vn])
                self.vals.append(s * coef)
        self.rhs.append(s * rhs)
        self.names.append(name)

    def matrix(self, n):
        return sparse.coo_matrix(
            (self.vals, (self.rows, self.cols)), shape=(len(self.rhs), n)).tocsr()


def _matrices(problem, idx):
    """Split constraints into a <=-block and an =-block (>= rows are sign
    flipped into <=; the flip is recorded for dual mapping)."""
    ub, eq, ub_sign = _CooBlock(), _CooBlock(), []
    for c in problem.constraints:
        if c.sense == "=":
            eq.add(c.name, c.coeffs, idx, c.rhs, flip=False)
        else:
            flip = c.sense == ">="
            ub.add(c.name, c.coeffs, idx, c.rhs, flip=flip)
            ub_sign.append(-1.0 if flip else 1.0)
    return ub, eq, ub_sign


_LINPROG_STATUS = {0: STATUS_OPTIMAL, 1: STATUS_LIMIT, 2: STATUS_INFEASIBLE, 3: STATUS_UNBOUNDED, 4: STATUS_LIMIT}
_MILP_STATUS = {0: STATUS_OPTIMAL, 1: STATUS_LIMIT, 2: STATUS_INFEASIBLE, 3: STATUS_UNBOUNDED, 4: STATUS_LIMIT}


class ScipyBackend:
    """scipy.optimize (HiGHS) adapter.  One solve per instance; safe to use
    concurrently from separate instances."""

    name = "scipy"

    def solve_lp(self, problem: LpProblem) -> SolveResult:
        problem.validate()
        idx = _index(problem)
        sgn = -1.0 if problem.sense == "max" else 1.0
        c = np.zeros(len(problem.variables))
        for vn, coef in problem.objective.items():
            c[idx[vn]] += sgn * coef
        ub, eq, ub_sign = _matrices(problem, idx)
        n = len(problem.variables)
        bounds = [(None if v.lb == -INF else v.lb, None if v.ub == INF else v.ub)
                  for v in problem.variables]
        kw = {}
        if ub.rhs:
            kw["A_ub"] = ub.matrix(n)
            kw["b_ub"] = np.array(ub.rhs)
        if eq.rhs:
            kw["A_eq"] = eq.matrix(n)
            kw["b_eq"] = np.array(eq.rhs)
        res = linprog(c, bounds=bounds, method="highs", **kw)
        status = _LINPROG_STATUS.get(res.status, STATUS_LIMIT)
        if status != STATUS_OPTIMAL:
            return SolveResult(status, None, {}, {}, {}, {}, backend_log=str(res.message))
        primal = {v.name: float(res.x[i]) for i, v in enumerate(problem.variables)}
        # scipy marginals are d(min)/d(rhs); our convention is d(obj in own
        # sense)/d(rhs): unchanged for min, negated for max (= the sgn
        # factor), plus the >= flip sign.
        duals = {}
        for k, name in enumerate(ub.names):
            duals[name] = float(sgn * ub_sign[k] * res.ineqlin.marginals[k])
        for k, name in enumerate(eq.names):
            duals[name] = float(sgn * res.eqlin.marginals[k])
        lb_duals = {v.name: float(sgn * res.lower.marginals[i]) for i, v in enumerate(problem.variables)}
        ub_duals = {v.name: float(sgn * res.upper.marginals[i]) for i, v in enumerate(problem.variables)}
        obj = float(sgn * res.fun) + problem.obj_const
        return SolveResult(status, obj, primal, duals, lb_duals, ub_duals)

    def solve_milp(self, problem: MilpProblem) -> SolveResult:
        problem.validate()
        idx = _index(problem)
        sgn = -1.0 if problem.sense == "max" else 1.0
        n = len(problem.variables)
        c = np.zeros(n)
        for vn, coef in problem.objective.items():
            c[idx[vn]] += sgn * coef
        ub, eq, _ = _matrices(problem, idx)
        constraints = []
        if ub.rhs:
            constraints.append(LinearConstraint(ub.matrix(n), -np.inf, np.array(ub.rhs)))
        if eq.rhs:
            b = np.array(eq.rhs)
            constraints.append(LinearConstraint(eq.matrix(n), b, b))
        integrality = np.array([1 if v.integer else 0 for v in problem.variables])
        lb = np.array([v.lb for v in problem.variables])
        ub = np.array([v.ub for v in problem.variables])
        from scipy.optimize import Bounds
        res = milp(c, constraints=constraints, integrality=integrality,
                   bounds=Bounds(lb, ub),
                   options={"mip_rel_gap": MILP_REL_GAP, "presolve": True})
        status = _MILP_STATUS.get(res.status, STATUS_LIMIT)
        if status == STATUS_INFEASIBLE:
            # presolve occasionally misjudges big-M models as infeasible;
            # confirm without it before reporting
            res = milp(c, constraints=constraints, integrality=integrality,
                       bounds=Bounds(lb, ub),
                       options={"mip_rel_gap": MILP_REL_GAP, "presolve": False})
            status = _MILP_STATUS.get(res.status, STATUS_LIMIT)
        if status != STATUS_OPTIMAL or res.x is None:
            return SolveResult(status, None, {}, {}, {}, {}, backend_log=str(res.message))
        primal = {v.name: float(res.x[i]) for i, v in enumerate(problem.variables)}
        obj = float(sgn * res.fun) + problem.obj_const
        return SolveResult(status, obj, primal, {}, {}, {})


_BACKENDS = {"scipy": ScipyBackend}


def get_backend(name: str | None = None):
    name = name or os.environ.get("OML_SOLVER", "scipy")
    try:
        return _BACKENDS[name]()
    except KeyError:
        raise SolverError(f"unknown solver backend {name!r}; known: {sorted(_BACKENDS)}")


def _check_result(problem, result):
    if result.status != STATUS_OPTIMAL:
        return result
    recomputed = result.value(problem.objective, problem.obj_const)
    scale = max(1.0, abs(result.objective))
    if abs(recomputed - result.objective) > 1e-8 * scale:
        raise SolverError(
            f"objective re-evaluation mismatch in {problem.name}: "
            f"{recomputed} vs {result.objective}")
    return result


def solve_lp(problem: LpProblem, backend: str | None = None) -> SolveResult:
    return _check_result(problem, get_backend(backend).solve_lp(problem))


def solve_milp(problem: MilpProblem, backend: str | None = None) -> SolveResult:
    return _check_result(problem, get_backend(backend).solve_milp(problem))


# ---------------------------------------------------------------------------
# MPS dump (fixed format) for debugging.

def _mps_num(x: float) -> str:
    s = f"{x:.6g}"
    return s if len(s) <= 12 else f"{x:.5e}"


def write_mps(problem: LpProblem, path: str):
    """Dump the problem in fixed-format MPS.

    Names are replaced by generated 8-character ids (X1.., R1..) to respect
    the fixed-field widths; a mapping comment block precedes the sections.
    The objective is written as-is; fixed MPS assumes minimization, so a
    'max' problem's objective row is negated.
    """
    problem.validate()
    vmap = {v.name: f"X{i + 1}" for i, v in enumerate(problem.variables)}
    rmap = {c.name: f"R{i + 1}" for i, c in enumerate(problem.constraints)}
    sgn = -1.0 if problem.sense == "max" else 1.0
    lines = []
    for orig, short in list(vmap.items()) + list(rmap.items()):
        lines.append(f"* {short} = {orig}")
    lines.append(f"NAME          {problem.name[:8].upper():<8}")
    lines.append("ROWS")
    lines.append(" N  COST")
    sense_tag = {"<=": "L", ">=": "G", "=": "E"}
    for c in problem.constraints:
        lines.append(f" {sense_tag[c.sense]}  {rmap[c.name]:<8}")
    lines.append("COLUMNS")
    in_int = False
    marker = 0
    for v in problem.variables:
        if v.integer != in_int:
            marker += 1
            tag = "'INTORG'" if v.integer else "'INTEND'"
            lines.append(f"    MARKER{marker:<4}{'':<2}'MARKER'{'':<17}{tag}")
            in_int = v.integer
        entries = []
        oc = problem.objective.get(v.name, 0.0)
        if oc:
            entries.append(("COST", sgn * oc))
        for c in problem.constraints:
            if v.name in c.coeffs and c.coeffs[v.name] != 0.0:
                entries.append((rmap[c.name], c.coeffs[v.name]))
        for j in range(0, len(entries), 2):
            pair = entries[j:j + 2]
            line = f"    {vmap[v.name]:<10}{pair[0][0]:<10}{_mps_num(pair[0][1]):<12}"
            if len(pair) == 2:
                line += f"   {pair[1][0]:<10}{_mps_num(pair[1][1]):<12}"
            lines.append(line.rstrip())
    if in_int:
        marker += 1
        lines.append(f"    MARKER{marker:<4}{'':<2}'MARKER'{'':<17}'INTEND'")
    lines.append("RHS")
    for c in problem.constraints:
        if c.rhs != 0.0:
            lines.append(f"    RHS       {rmap[c.name]:<10}{_mps_num(c.rhs):<12}".rstrip())
    lines.append("BOUNDS")
    for v in problem.variables:
        short = vmap[v.name]
        if v.lb == -INF and v.ub == INF:
            lines.append(f" FR BND       {short:<10}")
        else:
            if v.lb == -INF:
                lines.append(f" MI BND       {short:<10}")
            elif v.lb != 0.0:
                lines.append(f" LO BND       {short:<10}{_mps_num(v.lb):<12}".rstrip())
            if v.ub != INF:
                lines.append(f" UP BND       {short:<10}{_mps_num(v.ub):<12}".rstrip())
    lines.append("ENDATA")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
