import numpy as np
import pytest

import oml.bilevel as B
from oml.bilevel import (BendersCut, SubproblemError, solve_bilevel,
                         solve_master, solve_subproblem)
from oml.market import solve_clearing_lp, solve_redispatch
from oml.network import build_ptdf_set, derive_zoning
from oml.scenario import synthesize_case_study


def _setup(sc, design):
    zoning = derive_zoning(design, sc.network)
    return zoning, build_ptdf_set(sc.network, zoning, sc.gsk_capacity_at_node())


# ---------------------------------------------------------------------------
# subproblem = oracle value, valid supergradients

def test_subproblem_matches_lp_oracle(dc_toy):
    zoning, ptdfs = _setup(dc_toy, "fnp")
    for f in (0.0, 30.0, 50.0, 80.0):
        sub = solve_subproblem(dc_toy, zoning, ptdfs, {"h1": f})
        mo = solve_clearing_lp(dc_toy, zoning, ptdfs, {"h1": f})
        rd = solve_redispatch(dc_toy, ptdfs, mo, {"h1": f})
        oracle = float(np.sum(mo.surplus) - np.sum(rd.true_cost))
        assert sub.value == pytest.approx(oracle, abs=1e-6)
        # v(f) = 140 * min(f, 50) on this toy
        assert sub.value == pytest.approx(140.0 * min(f, 50.0), abs=1e-6)


def test_subproblem_sensitivity_is_supergradient(dc_toy):
    zoning, ptdfs = _setup(dc_toy, "fnp")
    probes = (0.0, 30.0, 50.0, 80.0)
    subs = {f: solve_subproblem(dc_toy, zoning, ptdfs, {"h1": f}) for f in probes}
    assert subs[30.0].sensitivity["h1"] == pytest.approx(140.0, abs=1e-6)
    assert subs[80.0].sensitivity["h1"] == pytest.approx(0.0, abs=1e-6)
    # each cut overestimates v at every probe point (concave v)
    for f0, sub in subs.items():
        lam = sub.sensitivity["h1"]
        for f1 in probes:
            cut = sub.value + lam * (f1 - f0)
            assert cut >= subs[f1].value - 1e-6


def test_subproblem_prices_match_oracle(dc_toy):
    zoning, ptdfs = _setup(dc_toy, "fnp")
    sub = solve_subproblem(dc_toy, zoning, ptdfs, {"h1": 30.0})
    assert sub.market.price_at_node("n1", 0) == pytest.approx(60.0)
    assert sub.market.price_at_node("n2", 0) == pytest.approx(200.0)
    assert sub.market.dc_flows["h1"] == pytest.approx([30.0])


def test_monolithic_kkt_milp_equals_decomposed(dc_toy, ac_toy):
    from oml.solver import solve_milp
    for sc, design, f_hat in ((dc_toy, "fnp", {"h1": 30.0}),
                              (ac_toy, "fzp", {})):
        zoning, ptdfs = _setup(sc, design)
        prob, _ = B.build_kkt_milp(sc, zoning, ptdfs, f_hat)
        res = solve_milp(prob)
        assert res.status == "optimal"
        sub = solve_subproblem(sc, zoning, ptdfs, f_hat)
        assert res.objective == pytest.approx(sub.value, abs=1e-6)


def test_subproblem_electrolyzer_capacity(h2_toy):
    zoning, ptdfs = _setup(h2_toy, "fnp")
    sub = solve_subproblem(h2_toy, zoning, ptdfs, {"h1": 200.0})
    mo = solve_clearing_lp(h2_toy, zoning, ptdfs, {"h1": 200.0})
    assert sub.h2_capacity["e1"] == pytest.approx(mo.h2_capacity["e1"], abs=1e-6)


# ---------------------------------------------------------------------------
# master problem

def test_master_no_cuts_is_unbounded_guard(dc_toy):
    # with a single trivial cut the master picks the cut's implied optimum
    cut = BendersCut(0.0, {"h1": 0.0}, {"h1": 140.0})
    f, ub = solve_master(dc_toy, [cut])
    # marginal value 140 > cost 20: build to the bound
    assert f["h1"] == pytest.approx(100.0)
    assert ub == pytest.approx((140.0 - 20.0) * 100.0)


def test_master_cut_intersection(dc_toy):
    cuts = [BendersCut(0.0, {"h1": 0.0}, {"h1": 140.0}),
            BendersCut(140.0 * 50.0, {"h1": 50.0}, {"h1": 0.0})]
    f, ub = solve_master(dc_toy, cuts)
    assert f["h1"] == pytest.approx(50.0, abs=1e-4)
    assert ub == pytest.approx(140.0 * 50.0 - 20.0 * 50.0, abs=1e-2)


def test_master_tie_break_prefers_small_capacity(dc_toy):
    # flat cut: any capacity gives the same alpha, so cost pins f at 0;
    # adding zero-cost ties still returns the smallest optimal f
    cuts = [BendersCut(1000.0, {"h1": 0.0}, {"h1": 20.0})]
    f, ub = solve_master(dc_toy, cuts)
    assert f["h1"] == pytest.approx(0.0, abs=1e-4)
    assert ub == pytest.approx(1000.0)


# ---------------------------------------------------------------------------
# full loop

def test_benders_toy_converges_to_known_optimum(dc_toy):
    zoning, ptdfs = _setup(dc_toy, "fnp")
    sol = solve_bilevel(dc_toy, zoning, ptdfs)
    assert sol.converged
    assert sol.f_dc["h1"] == pytest.approx(50.0, abs=1e-3)
    assert sol.objective == pytest.approx(6000.0, abs=1e-2)
    assert len(sol.iterations) < 20
    # bound monotonicity
    ubs = [r.upper_bound for r in sol.iterations]
    assert all(a >= b - 1e-6 for a, b in zip(ubs, ubs[1:]))
    assert all(r.lower_bound <= r.upper_bound + 1e-6 for r in sol.iterations)


def test_convergence_log_roundtrip(dc_toy, tmp_path):
    zoning, ptdfs = _setup(dc_toy, "fnp")
    sol = solve_bilevel(dc_toy, zoning, ptdfs)
    path = tmp_path / "conv.csv"
    B.write_convergence_log(str(path), "fnp", sol.iterations, ["h1"])
    import csv
    with open(path) as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == len(sol.iterations)
    assert float(rows[-1]["gap"]) == pytest.approx(sol.gap, abs=1e-6)
    assert float(rows[-1]["upper_bound"]) == pytest.approx(sol.upper_bound, abs=1e-6)


def test_max_iterations_reports_nonconverged(dc_toy):
    dc_toy.benders.max_iterations = 1
    dc_toy.benders.tolerance = 1e-9
    zoning, ptdfs = _setup(dc_toy, "fnp")
    sol = solve_bilevel(dc_toy, zoning, ptdfs)
    assert not sol.converged
    assert len(sol.iterations) == 1


# ---------------------------------------------------------------------------
# randomized oracle equivalence (acceptance criterion 2 at toy scale)

def test_random_fixed_capacity_oracle_equivalence(dc_toy, h2_toy):
    rng = np.random.default_rng(42)
    for sc in (dc_toy, h2_toy):
        zoning, ptdfs = _setup(sc, "fnp")
        hmax = sc.network.dc_candidates[0].max_cap
        for f in rng.uniform(0.0, hmax, size=5):
            sub = solve_subproblem(sc, zoning, ptdfs, {"h1": float(f)})
            mo = solve_clearing_lp(sc, zoning, ptdfs, {"h1": float(f)})
            rd = solve_redispatch(sc, ptdfs, mo, {"h1": float(f)})
            inv = sum(e.unit_cost * mo.h2_capacity[e.id] for e in sc.electrolyzers)
            oracle = float(np.sum(mo.surplus) - np.sum(rd.true_cost)) - inv
            # the MILP selects the welfare-best lower-level equilibrium
            assert sub.value >= oracle - 1e-6
