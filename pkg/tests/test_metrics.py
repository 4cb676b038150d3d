import numpy as np
import pytest

from oml.bilevel import solve_bilevel, solve_subproblem
from oml.metrics import (correlation, curtailment_split,
                         electrolyzer_profit_check, feasibility_residuals,
                         price_stats, unique_price_histogram, welfare_report,
                         wind_profit, write_reports)
from oml.network import build_ptdf_set, derive_zoning
from oml.scenario import Generator


def _solve(sc, design):
    zoning = derive_zoning(design, sc.network)
    ptdfs = build_ptdf_set(sc.network, zoning, sc.gsk_capacity_at_node())
    return solve_bilevel(sc, zoning, ptdfs)


def test_welfare_report_decomposes(dc_toy):
    sol = _solve(dc_toy, "fnp")
    wr = welfare_report(dc_toy, sol)
    assert wr.welfare == pytest.approx(wr.market_surplus - wr.redispatch_cost
                                       - wr.electrolyzer_cost - wr.hvdc_cost)
    assert wr.welfare == pytest.approx(sol.objective, abs=1e-4)
    assert wr.hvdc_cost == pytest.approx(20.0 * sol.f_dc["h1"], abs=1e-2)
    wr = welfare_report(dc_toy, sol, base=wr.market_surplus)
    assert wr.normalized(wr.market_surplus) == pytest.approx(1.0)


def test_curtailment_split_zero_without_wind(dc_toy):
    sol = _solve(dc_toy, "fnp")
    split = curtailment_split(dc_toy, sol.subproblem)
    assert split == {"market": 0.0, "redispatch": 0.0}


def test_curtailment_split_wind(ac_toy):
    # wind replaces thermal: single-zone clearing dispatches the full 50,
    # redispatch curtails 20 to honor the 30 MW line
    ac_toy.generators = [Generator("g1", "n1", "wind", 50.0, 0.0,
                                   np.ones(ac_toy.horizon))]
    zoning = derive_zoning("fzp", ac_toy.network)
    ptdfs = build_ptdf_set(ac_toy.network, zoning, ac_toy.gsk_capacity_at_node())
    sub = solve_subproblem(ac_toy, zoning, ptdfs, {})
    split = curtailment_split(ac_toy, sub)
    assert split["market"] == pytest.approx(0.0, abs=1e-6)
    assert split["redispatch"] == pytest.approx(20.0 / 50.0, abs=1e-6)


def test_wind_profit_and_settlement(ac_toy):
    ac_toy.generators = [Generator("g1", "n1", "wind", 50.0, 0.0,
                                   np.ones(ac_toy.horizon))]
    zoning = derive_zoning("fzp", ac_toy.network)
    ptdfs = build_ptdf_set(ac_toy.network, zoning, ac_toy.gsk_capacity_at_node())
    sub = solve_subproblem(ac_toy, zoning, ptdfs, {})
    profit = wind_profit(ac_toy, sub)
    # zonal price = utility 200 (wind cap < demand), da volume 50/step;
    # downward redispatch settles at mc = 0 and keeps the margin
    lam = sub.market.price_at_node("n1")
    expected = float(np.dot(lam, sub.market.dispatch["g1"]))
    assert profit["g1"] == pytest.approx(expected)


def test_electrolyzer_profit_interior_is_zero(h2_toy):
    sol = _solve(h2_toy, "fnp")
    checks = electrolyzer_profit_check(h2_toy, sol.subproblem)
    rec = checks["e1"]
    if rec["at_upper_bound"]:
        assert rec["net_profit"] >= -1e-4
    else:
        assert abs(rec["net_profit"]) <= 1e-4


def test_unique_price_histogram():
    prices = np.array([[10.0, 10.0, 30.0],
                       [10.0, 20.0, 30.0 + 1e-9]])
    hist = unique_price_histogram(prices)
    assert hist == {1: pytest.approx(200.0 / 3), 2: pytest.approx(100.0 / 3)}
    # permutation invariance
    assert unique_price_histogram(prices[::-1]) == hist
    # all identical
    assert unique_price_histogram(np.ones((3, 4))) == {1: 100.0}


def test_price_stats(dc_toy):
    sol = _solve(dc_toy, "fnp")
    pr = price_stats(dc_toy, sol.subproblem)
    assert pr.nodes == ["n2"]
    assert pr.prices.shape == (1, 1)
    assert pr.mean == pytest.approx(pr.median)
    assert sum(pr.histogram.values()) == pytest.approx(100.0)


def test_correlation():
    x = np.array([1.0, 2.0, 3.0, 4.0])
    assert correlation(x, -x) == pytest.approx(-1.0)
    assert correlation(x, x) == pytest.approx(1.0)
    assert np.isnan(correlation(x, np.ones(4)))


def test_feasibility_residuals(ac_toy):
    zoning = derive_zoning("fzp", ac_toy.network)
    ptdfs = build_ptdf_set(ac_toy.network, zoning, ac_toy.gsk_capacity_at_node())
    sub = solve_subproblem(ac_toy, zoning, ptdfs, {})
    res = feasibility_residuals(ac_toy, sub)
    assert res["balance"] <= 1e-6
    assert res["ac_flow"] <= 1e-6
    assert res["dc_flow"] <= 1e-6


def test_write_reports(dc_toy, tmp_path):
    sol = _solve(dc_toy, "fnp")
    paths = write_reports(str(tmp_path), dc_toy, [("fnp", "medium", sol)])
    names = sorted(p.split("/")[-1] for p in paths)
    assert names == ["curtailment.csv", "electrolyzer.csv", "hvdc.csv",
                     "prices.csv", "profit.csv", "unique_prices.csv",
                     "welfare.csv"]
    welfare = (tmp_path / "welfare.csv").read_text().splitlines()
    assert welfare[0].startswith("design,cost_level,")
    assert len(welfare) == 2 and welfare[1].startswith("fnp,medium,")
