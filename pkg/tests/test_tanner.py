from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ldpcsched.analysis import enumerate_cycles, girth
from ldpcsched.tanner import (
    AlistError,
    CodeConstructionError,
    ParityCheckMatrix,
    TannerGraph,
    build_ab_code,
    build_regular_code,
    lift_code,
    load_alist,
    parse_alist,
    save_alist,
    syndrome,
    write_alist,
)
from oracles import ab_dense, girth_nx, syndrome_dense


# ---------------------------------------------------------------- AB codes


@pytest.mark.parametrize("gamma,p", [(1, 2), (1, 5), (2, 3), (3, 5), (3, 7), (4, 11), (5, 5)])
def test_ab_code_matches_rolled_identity_blocks(gamma, p):
    H = build_ab_code(gamma, p)
    assert np.array_equal(H.to_dense(), ab_dense(gamma, p))


def test_ab_35_dimensions_and_weights(H35):
    assert (H35.m, H35.n) == (15, 25)
    assert set(H35.row_weights) == {5} and set(H35.col_weights) == {3}
    assert H35.regularity() == (3, 5)


def test_ab_37_block_11_is_identity_shifted_left_by_one(H37):
    block = H37.to_dense()[7:14, 7:14]
    # left shift by one: row i has its 1 in column i - 1 (mod 7)
    expected = np.zeros((7, 7), dtype=np.uint8)
    for i in range(7):
        expected[i, (i - 1) % 7] = 1
    assert np.array_equal(block, expected)
    assert (H37.m, H37.n) == (21, 49)


def test_ab_gamma_one_is_row_of_identities():
    H = build_ab_code(1, 5)
    assert np.array_equal(H.to_dense(), np.hstack([np.eye(5, dtype=np.uint8)] * 5))
    assert set(H.col_weights) == {1}


@pytest.mark.parametrize("gamma,p", [(3, 4), (3, 1), (0, 5), (6, 5), (2, 9)])
def test_ab_rejects_bad_parameters(gamma, p):
    with pytest.raises(CodeConstructionError):
        build_ab_code(gamma, p)


@pytest.mark.parametrize("gamma,p", [(2, 3), (3, 5), (3, 7), (4, 5)])
def test_ab_codes_have_no_4_cycles(gamma, p):
    H = build_ab_code(gamma, p)
    assert enumerate_cycles(H, 4) == []
    assert girth(H) == girth_nx(ab_dense(gamma, p)) >= 6


# ------------------------------------------------------------ regular codes


def test_regular_196_girth_6_and_deterministic(H196):
    assert (H196.m, H196.n) == (98, 196)
    assert H196.regularity() == (3, 6)
    assert girth(H196) >= 6
    assert girth_nx(H196.to_dense()) >= 6
    assert build_regular_code(3, 6, 196, seed=1) == H196
    assert build_regular_code(3, 6, 196, seed=2) != H196


def test_regular_small_degree_bookkeeping():
    H = build_regular_code(2, 4, 8, seed=0, min_girth=4)
    assert H.m == 4 and set(H.row_weights) == {4} and set(H.col_weights) == {2}


def test_regular_3_6_12_girth_6_is_infeasible():
    # 12 VNs of degree 3 need 36 distinct CN pairs, but 6 CNs offer only 15
    with pytest.raises(CodeConstructionError):
        build_regular_code(3, 6, 12, seed=0, min_girth=6, max_retries=5)


def test_regular_3_6_12_girth_4_builds():
    H = build_regular_code(3, 6, 12, seed=0, min_girth=4)
    assert H.regularity() == (3, 6)


@pytest.mark.parametrize("n", [48, 60])
def test_regular_small_girth_6_verified_by_enumerator(n):
    H = build_regular_code(3, 6, n, seed=3, min_girth=6)
    assert enumerate_cycles(H, 4) == []
    assert girth_nx(H.to_dense()) >= 6


def test_regular_rejects_infeasible_degrees():
    with pytest.raises(CodeConstructionError):
        build_regular_code(3, 6, 13)
    with pytest.raises(CodeConstructionError):
        build_regular_code(3, 6, 12, min_girth=5)


# ------------------------------------------------------------------ lifting


def test_lift_one_is_identity(H35):
    assert lift_code(H35, 1, seed=9) == H35


def test_lift_ab37_by_4(H37_lifted):
    assert (H37_lifted.m, H37_lifted.n) == (84, 196)
    assert H37_lifted.regularity() == (3, 7)
    assert enumerate_cycles(H37_lifted, 4) == []


def test_lift_is_deterministic_and_blockwise_circulant(H35):
    L1, L2 = lift_code(H35, 3, seed=4), lift_code(H35, 3, seed=4)
    assert L1 == L2
    D, B = L1.to_dense(), H35.to_dense()
    for c in range(H35.m):
        for v in range(H35.n):
            block = D[3 * c : 3 * c + 3, 3 * v : 3 * v + 3]
            if B[c, v]:
                # a circulant permutation: one 1 per row/col, constant diagonal offset
                assert block.sum(axis=0).tolist() == [1, 1, 1] and block.sum(axis=1).tolist() == [1, 1, 1]
                offs = {(int(np.flatnonzero(block[i])[0]) - i) % 3 for i in range(3)}
                assert len(offs) == 1
            else:
                assert not block.any()


@given(seed=st.integers(0, 10_000), lift=st.integers(2, 4))
def test_lift_preserves_row_weights(seed, lift):
    base = ParityCheckMatrix(3, 5, [[0, 1, 2], [1, 3], [0, 2, 3, 4]])
    L = lift_code(base, lift, seed=seed)
    assert np.array_equal(L.row_weights, np.repeat(base.row_weights, lift))
    assert np.array_equal(L.col_weights, np.repeat(base.col_weights, lift))


# ----------------------------------------------------------------- syndrome


def test_syndrome_zero_and_unit_vectors(H35):
    assert not syndrome(H35, np.zeros(25, dtype=np.uint8)).any()
    for v in (0, 7, 24):
        x = np.zeros(25, dtype=np.uint8)
        x[v] = 1
        assert np.flatnonzero(syndrome(H35, x)).tolist() == list(H35.cols[v])


@given(bits=st.lists(st.integers(0, 1), min_size=25, max_size=25))
def test_syndrome_matches_dense_product(bits):
    H = build_ab_code(3, 5)
    x = np.array(bits, dtype=np.uint8)
    assert np.array_equal(syndrome(H, x), syndrome_dense(H.to_dense(), x))


def test_syndrome_length_mismatch(H35):
    with pytest.raises(ValueError):
        syndrome(H35, np.zeros(24, dtype=np.uint8))


# --------------------------------------------------------------------- alist


def test_alist_roundtrip_constructed(H35, H37_lifted, H196, tmp_path):
    for H in (H35, H37_lifted, H196, build_ab_code(1, 5)):
        assert parse_alist(write_alist(H)) == H
        assert parse_alist(write_alist(H).encode()) == H
    save_alist(H35, tmp_path / "h.alist")
    assert load_alist(tmp_path / "h.alist") == H35


def test_alist_layout_is_standard(H35):
    lines = write_alist(H35).splitlines()
    assert lines[0] == "25 15" and lines[1] == "3 5"
    assert lines[2].split() == ["3"] * 25 and lines[3].split() == ["5"] * 15
    assert len(lines) == 4 + 25 + 15
    assert lines[4].split() == [str(c + 1) for c in H35.cols[0]]


@st.composite
def sparse_matrices(draw):
    m = draw(st.integers(1, 6))
    n = draw(st.integers(1, 8))
    dense = draw(st.lists(st.lists(st.integers(0, 1), min_size=n, max_size=n), min_size=m, max_size=m))
    return ParityCheckMatrix.from_dense(np.array(dense, dtype=np.uint8))


@given(H=sparse_matrices())
def test_alist_roundtrip_property(H):
    assert parse_alist(write_alist(H)) == H


def _corrupt(text: str, lineno: int, new: str) -> str:
    lines = text.splitlines()
    lines[lineno - 1] = new
    return "\n".join(lines) + "\n"


def test_alist_out_of_range_index_reports_line(H35):
    text = write_alist(H35)
    bad = _corrupt(text, 5, "1 6 99")  # column 1 lists CN 99 of 15
    with pytest.raises(AlistError) as exc:
        parse_alist(bad)
    assert exc.value.line == 5 and "99" in str(exc.value)


@pytest.mark.parametrize(
    "mutate,line",
    [
        (lambda t: "", 1),
        (lambda t: _corrupt(t, 1, "25"), 1),
        (lambda t: _corrupt(t, 3, " ".join(["3"] * 24)), 3),
        (lambda t: _corrupt(t, 5, "1 6"), 5),
        (lambda t: _corrupt(t, 30, "1 2 3 4 x"), 30),
        (lambda t: _corrupt(t, 5, "1 7 11"), 5),  # disagrees with row lists
        (lambda t: t + "1 2 3\n", 45),
        (lambda t: "\n".join(t.splitlines()[:20]), None),
    ],
)
def test_alist_malformed_inputs(H35, mutate, line):
    with pytest.raises(AlistError) as exc:
        parse_alist(mutate(write_alist(H35)))
    if line is not None:
        assert exc.value.line == line


# ---------------------------------------------------------------- structure


def test_rows_cols_consistent_and_graph_edges(H196):
    for c, row in enumerate(H196.rows):
        for v in row:
            assert c in H196.cols[v]
    G = TannerGraph(H196)
    assert len(G.edges()) == H196.num_edges == 3 * 196
    assert set(map(tuple, np.argwhere(H196.to_dense()))) == set(G.edges())
    assert G.is_connected()


def test_matrix_validation_and_immutability():
    with pytest.raises(ValueError):
        ParityCheckMatrix(2, 3, [[0, 0], [1]])
    with pytest.raises(ValueError):
        ParityCheckMatrix(2, 3, [[0, 3], [1]])
    with pytest.raises(ValueError):
        ParityCheckMatrix.from_dense(np.array([[0, 2]]))
    H = ParityCheckMatrix(1, 2, [[0, 1]])
    with pytest.raises(AttributeError):
        H.m = 4
    assert not TannerGraph(ParityCheckMatrix(2, 2, [[0], [1]])).is_connected()
