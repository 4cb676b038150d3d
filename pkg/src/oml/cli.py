"""Experiment runner: sweeps market designs x electrolyzer cost levels.

Each (design, cost level) cell runs the full Benders loop on its own copy
of the scenario and writes a convergence log; the seven report CSVs and a
manifest are assembled once all cells finish.  Cells are independent and
can run in parallel; report writing happens in the parent process only.
"""

from __future__ import annotations

import argparse
import copy
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

from .network import DESIGNS, build_ptdf_set, derive_zoning
from .scenario import (COST_LEVELS, BendersSettings, load_scenario,
                       synthesize_case_study, validate_scenario)
from .bilevel import solve_bilevel, write_convergence_log
from .metrics import write_reports
from .solver import SolverError

BUILTINS = ("case-study",)


@dataclass
class RunConfig:
    scenario: str | None = None
    builtin: str | None = "case-study"
    designs: list[str] = field(default_factory=lambda: list(DESIGNS))
    cost_levels: list[str] = field(default_factory=lambda: sorted(COST_LEVELS))
    out: str = "out"
    tol: float | None = None
    max_iter: int | None = None
    jobs: int = 1
    seed: int = 0
    dump_mps: bool = False

    def validate(self):
        if bool(self.scenario) == bool(self.builtin):
            raise ValueError("exactly one of scenario path / builtin tag required")
        if self.builtin and self.builtin not in BUILTINS:
            raise ValueError(f"unknown builtin {self.builtin!r}; have {BUILTINS}")
        bad = [d for d in self.designs if d not in DESIGNS]
        if bad or not self.designs:
            raise ValueError(f"designs must be a non-empty subset of {DESIGNS}")
        bad = [c for c in self.cost_levels if c not in COST_LEVELS]
        if bad or not self.cost_levels:
            raise ValueError(
                f"cost levels must be a non-empty subset of {sorted(COST_LEVELS)}")


def _cell_scenario(config: RunConfig, level: str):
    if config.builtin:
        return synthesize_case_study(level, seed=config.seed)
    sc = load_scenario(config.scenario)
    sc = copy.deepcopy(sc)
    # cost levels override the file's electrolyzer cost so that a sweep
    # means the same thing for loaded and builtin scenarios
    for e in sc.electrolyzers:
        e.unit_cost = COST_LEVELS[level]
    return sc


def _run_cell(config: RunConfig, design: str, level: str):
    sc = _cell_scenario(config, level)
    if config.tol is not None:
        sc.benders.tolerance = config.tol
    if config.max_iter is not None:
        sc.benders.max_iterations = config.max_iter
    errors = [e for e in validate_scenario(sc) if e.startswith("error")]
    if errors:
        raise ValueError("; ".join(errors))
    zoning = derive_zoning(design, sc.network)
    ptdfs = build_ptdf_set(sc.network, zoning, sc.gsk_capacity_at_node())
    t0 = time.perf_counter()
    sol = solve_bilevel(sc, zoning, ptdfs)
    seconds = time.perf_counter() - t0
    log_path = os.path.join(config.out, f"convergence_{design}_{level}.csv")
    write_convergence_log(log_path, design, sol.iterations,
                          [h.id for h in sc.network.dc_candidates])
    if config.dump_mps:
        from .market import build_clearing_stage, stage_to_problem, v_dccap
        from .solver import write_mps
        fixed = {v_dccap(h.id): sol.f_dc.get(h.id, 0.0)
                 for h in sc.network.dc_candidates}
        prob = stage_to_problem(build_clearing_stage(sc, zoning, ptdfs).stage,
                                fixed)
        write_mps(prob, os.path.join(config.out, f"clearing_{design}_{level}.mps"))
    return sol, seconds


def run_experiments(config: RunConfig) -> int:
    """Runs the sweep and writes reports; 0 = all cells converged,
    2 = some cells did not converge, 1 = input or infrastructure error."""
    try:
        config.validate()
        os.makedirs(config.out, exist_ok=True)
        grid = [(d, c) for d in config.designs for c in config.cost_levels]
        results = {}
        if config.jobs > 1:
            with ProcessPoolExecutor(max_workers=config.jobs) as pool:
                futures = {cell: pool.submit(_run_cell, config, *cell)
                           for cell in grid}
                for cell, fut in futures.items():
                    results[cell] = fut.result()
        else:
            for cell in grid:
                results[cell] = _run_cell(config, *cell)
    except (ValueError, OSError, SolverError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    # one scenario per cost level is enough for the static report fields
    scenario = _cell_scenario(config, config.cost_levels[0])
    cells = [(d, c, results[(d, c)][0]) for d, c in grid]
    write_reports(config.out, scenario, cells)

    manifest = {
        "config": {
            "scenario": config.scenario, "builtin": config.builtin,
            "designs": config.designs, "cost_levels": config.cost_levels,
            "tol": config.tol, "max_iter": config.max_iter,
            "jobs": config.jobs, "seed": config.seed,
        },
        "backend": os.environ.get("OML_SOLVER", "scipy"),
        "cells": [
            {"design": d, "cost_level": c,
             "converged": bool(sol.converged),
             "gap": sol.gap, "iterations": len(sol.iterations),
             "objective": sol.objective,
             "f_dc": {h: float(v) for h, v in sol.f_dc.items()},
             "seconds": round(secs, 3)}
            for (d, c), (sol, secs) in results.items()
        ],
    }
    with open(os.path.join(config.out, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")

    all_ok = all(sol.converged for sol, _ in results.values())
    return 0 if all_ok else 2


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(
        prog="oml",
        description="Offshore market design sweep: HVDC sizing via Benders "
                    "over clearing + redispatch equilibria.")
    src = ap.add_mutually_exclusive_group()
    src.add_argument("--scenario", help="scenario JSON path")
    src.add_argument("--builtin", default=None, choices=BUILTINS,
                     help="bundled scenario tag (default: case-study)")
    ap.add_argument("--designs", default=",".join(DESIGNS),
                    help="comma list from fnp,onp,ozp,fzp")
    ap.add_argument("--cost-levels", default=",".join(sorted(COST_LEVELS)),
                    help="comma list from low,medium,high")
    ap.add_argument("--out", default="out", help="output directory")
    ap.add_argument("--tol", type=float, default=None,
                    help="Benders gap tolerance override")
    ap.add_argument("--max-iter", type=int, default=None,
                    help="Benders iteration cap override")
    ap.add_argument("--jobs", type=int, default=1, help="parallel cells")
    ap.add_argument("--seed", type=int, default=0,
                    help="seed for the builtin scenario synthesis")
    ap.add_argument("--dump-mps", action="store_true",
                    help="write the clearing LP of each cell in MPS format")
    args = ap.parse_args(argv)
    config = RunConfig(
        scenario=args.scenario,
        builtin=args.builtin or (None if args.scenario else "case-study"),
        designs=[d.strip() for d in args.designs.split(",") if d.strip()],
        cost_levels=[c.strip() for c in args.cost_levels.split(",") if c.strip()],
        out=args.out, tol=args.tol, max_iter=args.max_iter,
        jobs=args.jobs, seed=args.seed, dump_mps=args.dump_mps)
    return run_experiments(config)


if __name__ == "__main__":
    sys.exit(main())
