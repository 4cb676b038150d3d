import numpy as np
import pytest

from oml.network import (AcLine, DcLine, NetworkModel, Node, TopologyError,
                         build_gsk, build_nodal_ptdf, build_ptdf_set,
                         build_zonal_ptdf, derive_zoning)
from conftest import ring3


def _flow(net, injections):
    ptdf = build_nodal_ptdf(net)
    inj = np.array([injections.get(n, 0.0) for n in net.node_ids])
    return {ln.id: float(ptdf[i] @ inj) for i, ln in enumerate(net.ac_lines)}


def test_ring_split_two_thirds_one_third():
    # 90 MW a -> c on the symmetric ring: 60 direct, 30 around
    flows = _flow(ring3(), {"a": 90.0, "c": -90.0})
    assert flows["ac"] == pytest.approx(60.0, abs=1e-9)
    assert flows["ab"] == pytest.approx(30.0, abs=1e-9)
    assert flows["bc"] == pytest.approx(30.0, abs=1e-9)


def test_ptdf_slack_invariance():
    base = ring3()
    inj = {"a": 90.0, "b": -40.0, "c": -50.0}
    ref = _flow(base, inj)
    for slack in ("b", "c"):
        net = NetworkModel(nodes=base.nodes, ac_lines=base.ac_lines,
                           dc_candidates=[], slack_node=slack)
        alt = _flow(net, inj)
        for lid, f in ref.items():
            assert alt[lid] == pytest.approx(f, abs=1e-9)


def test_ptdf_reactance_scale_invariance():
    base = ring3()
    scaled = NetworkModel(
        nodes=base.nodes,
        ac_lines=[AcLine(l.id, l.from_node, l.to_node, 7.5 * l.reactance,
                         l.thermal_cap, l.ram) for l in base.ac_lines],
        dc_candidates=[], slack_node="a")
    inj = {"a": 90.0, "b": -40.0, "c": -50.0}
    ref, alt = _flow(base, inj), _flow(scaled, inj)
    for lid, f in ref.items():
        assert alt[lid] == pytest.approx(f, abs=1e-9)


def test_ptdf_orientation_sign():
    # reversing a line's declared direction flips its PTDF row
    base = ring3()
    flipped = NetworkModel(
        nodes=base.nodes,
        ac_lines=[AcLine("ab", "b", "a", 1.0, 1000.0, 1000.0)]
                 + [l for l in base.ac_lines if l.id != "ab"],
        dc_candidates=[], slack_node="a")
    ref = _flow(base, {"a": 90.0, "c": -90.0})
    alt = _flow(flipped, {"a": 90.0, "c": -90.0})
    assert alt["ab"] == pytest.approx(-ref["ab"], abs=1e-9)
    assert alt["ac"] == pytest.approx(ref["ac"], abs=1e-9)


def test_disconnected_ac_component_rejected():
    with pytest.raises(TopologyError):
        build_nodal_ptdf(NetworkModel(
            nodes=[Node("a", "Z1"), Node("b", "Z1"), Node("c", "Z1"),
                   Node("d", "Z1")],
            ac_lines=[AcLine("ab", "a", "b", 1.0, 100.0, 100.0),
                      AcLine("cd", "c", "d", 1.0, 100.0, 100.0)],
            dc_candidates=[], slack_node="a"))


def test_offshore_node_without_dc_rejected():
    with pytest.raises(TopologyError):
        NetworkModel(nodes=[Node("a", "Z1"), Node("o", "Z1", offshore=True)],
                     ac_lines=[], dc_candidates=[], slack_node="a")


def test_gsk_pro_rata_and_uniform_fallback():
    net = ring3()
    zoning = derive_zoning("fzp", net)
    gsk = build_gsk(net, zoning, {"a": 300.0, "b": 100.0})
    col = gsk[:, 0]
    assert col == pytest.approx([0.75, 0.25, 0.0])
    # no capacity anywhere -> uniform weights
    gsk = build_gsk(net, zoning, {})
    assert gsk[:, 0] == pytest.approx([1 / 3, 1 / 3, 1 / 3])
    assert np.allclose(gsk.sum(axis=0), 1.0)


def test_zonal_ptdf_composition():
    net = ring3()
    zoning = derive_zoning("fnp", net)  # singleton zones
    ptdfs = build_ptdf_set(net, zoning, {"a": 1.0, "b": 1.0, "c": 1.0})
    # with singleton zones the zonal PTDF is a column permutation of nodal
    for z, j in ptdfs.zone_index.items():
        node = [n for n in net.node_ids if zoning.zone_of[n] == z]
        assert len(node) == 1
        i = ptdfs.node_index[node[0]]
        assert ptdfs.zonal[:, j] == pytest.approx(ptdfs.nodal[:, i])


def test_derive_zoning_designs():
    net = NetworkModel(
        nodes=[Node("1", "Z1"), Node("2", "Z2"),
               Node("4", "Z1", offshore=True), Node("5", "Z2", offshore=True)],
        ac_lines=[AcLine("l12", "1", "2", 1.0, 100.0, 100.0)],
        dc_candidates=[DcLine("h1", "4", "1", 100.0, 1.0, 100.0),
                       DcLine("h2", "5", "2", 100.0, 1.0, 100.0),
                       DcLine("h3", "4", "5", 100.0, 1.0, 100.0)],
        slack_node="1")
    fnp = derive_zoning("fnp", net)
    assert len(fnp.zones) == 4
    onp = derive_zoning("onp", net)
    assert onp.zone_of["4"] != onp.zone_of["5"]
    assert onp.zone_of["1"] == "Z1" and onp.zone_of["2"] == "Z2"
    ozp = derive_zoning("ozp", net)
    assert ozp.zone_of["4"] == ozp.zone_of["5"]
    assert len(ozp.zones) == 3
    fzp = derive_zoning("fzp", net)
    assert fzp.zone_of["4"] == "Z1" and fzp.zone_of["5"] == "Z2"
    with pytest.raises(ValueError):
        derive_zoning("xxx", net)


def test_monitored_dc_cross_zone_only():
    net = NetworkModel(
        nodes=[Node("1", "Z1"), Node("2", "Z2"),
               Node("4", "Z1", offshore=True), Node("5", "Z2", offshore=True)],
        ac_lines=[AcLine("l12", "1", "2", 1.0, 100.0, 100.0)],
        dc_candidates=[DcLine("h1", "4", "1", 100.0, 1.0, 100.0),
                       DcLine("h2", "4", "5", 100.0, 1.0, 100.0)],
        slack_node="1")
    fzp = derive_zoning("fzp", net)
    assert fzp.monitored_dc(net) == ["h2"]  # h1 is zone-internal under fzp
    fnp = derive_zoning("fnp", net)
    assert set(fnp.monitored_dc(net)) == {"h1", "h2"}


def test_zonal_dimension_mismatch():
    with pytest.raises(ValueError):
        build_zonal_ptdf(np.zeros((2, 3)), np.zeros((4, 2)))
