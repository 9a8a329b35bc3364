from __future__ import annotations

import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ldpcsched.analysis import (
    ccs,
    ccs_bounds_ab,
    ccs_bounds_regular,
    count_cycles,
    enumerate_cycles,
    girth,
    neighborhood_size,
    zeta,
)
from ldpcsched.tanner import ParityCheckMatrix, TannerGraph, build_regular_code
from oracles import ccs_dense, cycle_cn_sets_nx, cycle_count_nx, girth_nx


# ------------------------------------------------------------------- cycles


@pytest.mark.parametrize("p,expected", [(5, 100), (7, 294)])
def test_ab_six_cycle_count(p, expected):
    from ldpcsched.tanner import build_ab_code

    H = build_ab_code(3, p)
    assert len(enumerate_cycles(H, 6)) == expected == p * p * (p - 1)


def test_ab35_has_no_four_cycles(H35):
    assert enumerate_cycles(H35, 4) == []
    assert count_cycles(H35, (4, 6)) == {4: 0, 6: 100}


def test_cycles_are_canonical_and_valid(H35):
    cycles = enumerate_cycles(H35, 6)
    assert len(set(cycles)) == len(cycles)
    for cy in cycles:
        assert cy.length == 6 and cy.cns[0] == min(cy.cns) and cy.vns[0] < cy.vns[-1]
        nodes = cy.nodes
        assert len(set(nodes)) == 6
        for (k1, i1), (k2, i2) in zip(nodes, nodes[1:] + nodes[:1]):
            c, v = (i1, i2) if k1 == "c" else (i2, i1)
            assert v in H35.rows[c]


def test_unsupported_kappa(H35):
    for k in (2, 5, 10):
        with pytest.raises(ValueError):
            enumerate_cycles(H35, k)


@st.composite
def small_graphs(draw):
    m = draw(st.integers(2, 8))
    n = draw(st.integers(2, 9))
    dense = np.array(
        draw(st.lists(st.lists(st.integers(0, 1), min_size=n, max_size=n), min_size=m, max_size=m)),
        dtype=np.uint8,
    )
    return dense


@given(dense=small_graphs(), kappa=st.sampled_from([4, 6, 8]))
def test_cycle_enumerator_matches_networkx(dense, kappa):
    H = ParityCheckMatrix.from_dense(dense)
    cycles = enumerate_cycles(H, kappa)
    assert len(cycles) == cycle_count_nx(dense, kappa)
    assert {frozenset(cy.cns) for cy in cycles} == cycle_cn_sets_nx(dense, kappa)


def test_cycle_enumerator_on_twelve_cn_graph():
    H = build_regular_code(3, 6, 24, seed=5, min_girth=4)
    dense = H.to_dense()
    for kappa in (4, 6, 8):
        assert len(enumerate_cycles(H, kappa)) == cycle_count_nx(dense, kappa)


@given(dense=small_graphs())
def test_girth_matches_networkx(dense):
    H = ParityCheckMatrix.from_dense(dense)
    g = girth_nx(dense)
    assert girth(H) == (None if math.isinf(g) else g)


# --------------------------------------------------------------------- CCS


def fig1_toy() -> ParityCheckMatrix:
    # cluster CNs 0,1,2; external CNs 3,4,5.  VNs 0..2 bridge CN i to CN 3+i,
    # VNs 3..5 are internal to the cluster, VNs 6..8 internal to the outside.
    rows = [
        [0, 3, 4],
        [1, 4, 5],
        [2, 5, 3],
        [0, 6, 7],
        [1, 7, 8],
        [2, 8, 6],
    ]
    return ParityCheckMatrix(6, 9, rows)


def test_fig1_toy_ccs():
    H = fig1_toy()
    rep = ccs(H, {0, 1, 2})
    assert rep.W == (0, 1, 2) and rep.A == 3 and rep.B == 3
    assert rep.edges_in == 3 and rep.edges_out == 3 and rep.zeta == 6
    # the external CNs touched by W
    assert {c for v in rep.W for c in H.cols[v] if c >= 3} == {3, 4, 5}


def test_ccs_same_row_group_gives_zp(H37):
    for z in range(1, 8):
        assert ccs(H37, range(7, 7 + z)).A == 7 * z


def test_ccs_errors(H35):
    with pytest.raises(ValueError):
        ccs(H35, [])
    with pytest.raises(ValueError):
        ccs(H35, range(15))
    with pytest.raises(ValueError):
        ccs(H35, [0, 0])
    with pytest.raises(ValueError):
        ccs(H35, [15])
    assert zeta(H35, range(15)) == 0


@given(data=st.data())
def test_ccs_matches_dense_oracle(H196, data):
    z = data.draw(st.integers(1, 12))
    cluster = data.draw(st.lists(st.integers(0, 97), min_size=z, max_size=z, unique=True))
    rep = ccs(H196, cluster)
    ref = ccs_dense(H196.to_dense(), cluster)
    assert list(rep.W) == ref["W"]
    assert (rep.A, rep.B, rep.edges_in, rep.edges_out, rep.zeta) == (
        ref["A"], ref["B"], ref["edges_in"], ref["edges_out"], ref["zeta"]
    )
    assert rep.n_neighbors == ref["n_neighbors"] == neighborhood_size(H196, cluster)
    # proper cluster of a connected graph: CCS is nonempty; VN-regular: zeta = j A
    assert rep.A >= 1
    assert rep.zeta == 3 * rep.A
    for v in rep.W:
        cs = set(H196.cols[v])
        assert cs & set(cluster) and cs - set(cluster)


@given(data=st.data())
def test_nonempty_ccs_on_connected_graphs(H35, H37_lifted, data):
    H = data.draw(st.sampled_from([H35, H37_lifted]))
    assert TannerGraph(H).is_connected()
    z = data.draw(st.integers(1, H.m - 1))
    cluster = data.draw(st.lists(st.integers(0, H.m - 1), min_size=z, max_size=z, unique=True))
    assert ccs(H, cluster).A >= 1


# ------------------------------------------------------------------ bounds


def test_regular_bound_examples():
    assert ccs_bounds_regular(3, 6, 1, 6) == (4, 6)
    assert ccs_bounds_regular(3, 6, 2, 12) == (8, 12)


@given(data=st.data())
def test_regular_bounds_hold_on_random_clusters(H196, data):
    z = data.draw(st.integers(1, 7))
    cluster = data.draw(st.lists(st.integers(0, 97), min_size=z, max_size=z, unique=True))
    rep = ccs(H196, cluster)
    lo, hi = ccs_bounds_regular(3, 6, z, rep.n_neighbors)
    assert lo <= rep.A <= hi


def test_regular_bounds_exhaustive_on_small_graph():
    # every proper cluster of a connected m = 6 (3,6) graph; the interval
    # never pinches since a pinch forces |W| = 0
    H = build_regular_code(3, 6, 12, seed=0, min_girth=4)
    assert TannerGraph(H).is_connected()
    for z in range(1, 6):
        for cl in itertools.combinations(range(6), z):
            rep = ccs(H, cl)
            lo, hi = ccs_bounds_regular(3, 6, z, rep.n_neighbors)
            assert lo <= rep.A <= hi
            assert lo < hi


def test_regular_bounds_pinch_exactly_on_components():
    # two disjoint copies: a cluster equal to one component has jv = kz
    base = build_regular_code(3, 6, 12, seed=0, min_girth=4)
    rows = [list(r) for r in base.rows] + [[v + 12 for v in r] for r in base.rows]
    H = ParityCheckMatrix(12, 24, rows)
    pinched = []
    for z in range(1, 7):
        for cl in itertools.combinations(range(12), z):
            rep = ccs(H, cl)
            lo, hi = ccs_bounds_regular(3, 6, z, rep.n_neighbors)
            assert lo <= rep.A <= hi
            if lo == hi:
                pinched.append(cl)
                assert rep.A == 0
    assert pinched == [tuple(range(6)), tuple(range(6, 12))]


def test_ab_bound_examples():
    b = ccs_bounds_ab(7, 2, "same_row_group")
    assert b.side == "exact" and b.value == 14 and b.holds(14) and not b.holds(13)
    g = ccs_bounds_ab(7, 3, "generic")
    assert g.exact == Fraction(36, 4) and g.value == 9 and g.side == "lower"
    t = ccs_bounds_ab(7, 3, "triple_6cycles")
    assert t.value == 18 and t.side == "upper" and t.holds(18) and not t.holds(19)


def test_ab_generic_bound_rounds_up():
    b = ccs_bounds_ab(7, 2, "generic")
    assert b.exact == Fraction(26, 4) and b.value == 7


@pytest.mark.parametrize(
    "p,z,kind",
    [(7, 0, "generic"), (7, 8, "same_row_group"), (7, 2, "triple_6cycles"), (7, 7, "triple_6cycles"), (7, 3, "bogus")],
)
def test_ab_bound_range_errors(p, z, kind):
    with pytest.raises(ValueError):
        ccs_bounds_ab(p, z, kind)
