"""Offshore market layout toolkit: market-design evaluation for offshore
grids with HVDC investment, electrolyzer siting, flow-based day-ahead
clearing, and cost-based redispatch."""

from .network import (DESIGNS, AcLine, DcLine, NetworkModel, Node, PtdfSet,
                      TopologyError, Zoning, build_ptdf_set, derive_zoning)
from .scenario import (COST_LEVELS, ScenarioData, ScenarioError,
                       load_scenario, synthesize_case_study,
                       validate_scenario, write_scenario)
from .market import (MarketOutcome, RedispatchOutcome, build_clearing_stage,
                     build_redispatch_stage, market_values, solve_clearing_lp,
                     solve_redispatch)
from .bilevel import (BendersCut, BilevelSolution, IterationRecord,
                      SubproblemError, SubproblemSolution, solve_bilevel,
                      solve_master, solve_subproblem, write_convergence_log)
from .metrics import (PriceReport, WelfareReport, correlation,
                      curtailment_split, electrolyzer_profit_check,
                      feasibility_residuals, price_stats,
                      unique_price_histogram, welfare_report, wind_profit,
                      write_reports)
from .cli import RunConfig, run_experiments
from .solver import SolverError, get_backend

__all__ = [
    "AcLine", "BendersCut", "BilevelSolution", "COST_LEVELS", "DESIGNS",
    "DcLine", "IterationRecord", "MarketOutcome", "NetworkModel", "Node",
    "PriceReport", "PtdfSet", "RedispatchOutcome", "RunConfig",
    "ScenarioData", "ScenarioError", "SolverError", "SubproblemError",
    "SubproblemSolution", "TopologyError", "WelfareReport", "Zoning",
    "build_clearing_stage", "build_ptdf_set", "build_redispatch_stage",
    "correlation", "curtailment_split", "derive_zoning",
    "electrolyzer_profit_check", "feasibility_residuals", "get_backend",
    "load_scenario", "market_values", "price_stats", "run_experiments",
    "solve_bilevel", "solve_clearing_lp", "solve_master", "solve_redispatch",
    "solve_subproblem", "synthesize_case_study", "unique_price_histogram",
    "validate_scenario", "welfare_report", "wind_profit",
    "write_convergence_log", "write_reports",
]

__version__ = "0.1.0"
