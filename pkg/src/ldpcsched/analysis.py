"""Cycle enumeration and cluster-connecting-set (CCS) analysis."""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable

from .tanner import ParityCheckMatrix, TannerGraph, as_matrix

SUPPORTED_CYCLE_LENGTHS = (4, 6, 8)


@dataclass(frozen=True, order=True)
class Cycle:
    """A cycle c0 - v0 - c1 - v1 - ... - c_{L-1} - v_{L-1} - c0.

    Canonical form: ``c0`` is the smallest CN on the cycle and the direction
    is chosen so that ``v0 < v_{L-1}``.  Two cycles are equal iff they have
    the same edge set.
    """

    cns: tuple[int, ...]
    vns: tuple[int, ...]

    @property
    def length(self) -> int:
        return 2 * len(self.cns)

    @property
    def nodes(self) -> tuple[tuple[str, int], ...]:
        out = []
        for c, v in zip(self.cns, self.vns):
            out += [("c", c), ("v", v)]
        return tuple(out)


def enumerate_cycles(G: TannerGraph | ParityCheckMatrix, kappa: int) -> list[Cycle]:
    """Every length-``kappa`` cycle exactly once, in canonical form.

    Depth-limited path search rooted at each CN ``s``, visiting only CNs
    larger than ``s`` so that ``s`` is the minimum CN of whatever it closes.
    """
    if kappa not in SUPPORTED_CYCLE_LENGTHS:
        raise ValueError(f"kappa must be one of {SUPPORTED_CYCLE_LENGTHS}, got {kappa}")
    H = as_matrix(G)
    rows, cols = H.rows, H.cols
    half = kappa // 2
    found: list[Cycle] = []

    for s in range(H.m):
        cns = [s]
        vns: list[int] = []

        def extend(c: int) -> None:
            last = len(cns) == half
            for v in rows[c]:
                if v in vns:
                    continue
                if last:
                    # close back to s; v > v0 fixes the orientation
                    if v > vns[0] and c != s and s in cols[v]:
                        found.append(Cycle(tuple(cns), tuple(vns) + (v,)))
                    continue
                vns.append(v)
                for c2 in cols[v]:
                    if c2 > s and c2 != c and c2 not in cns:
                        cns.append(c2)
                        extend(c2)
                        cns.pop()
                vns.pop()

        extend(s)
    return found


def count_cycles(G: TannerGraph | ParityCheckMatrix, kappas: Iterable[int] = SUPPORTED_CYCLE_LENGTHS) -> dict[int, int]:
    return {k: len(enumerate_cycles(G, k)) for k in kappas}


def girth(G: TannerGraph | ParityCheckMatrix) -> int | None:
    """Length of the shortest cycle, or None for a forest.  BFS from every node."""
    H = as_matrix(G)
    m = H.m
    # node ids: CNs 0..m-1, VNs m..m+n-1
    adj = [[m + v for v in r] for r in H.rows] + [list(c) for c in H.cols]
    best = math.inf
    for root in range(len(adj)):
        dist = {root: 0}
        parent = {root: -1}
        queue = deque([root])
        while queue:
            u = queue.popleft()
            if 2 * dist[u] + 1 >= best:
                break
            for w in adj[u]:
                if w not in dist:
                    dist[w] = dist[u] + 1
                    parent[w] = u
                    queue.append(w)
                elif parent[u] != w:
                    best = min(best, dist[u] + dist[w] + 1)
    return None if best is math.inf else int(best)


@dataclass(frozen=True)
class CCSReport:
    """Cluster-connecting set of a CN cluster and its edge counts.

    ``W`` holds the VNs with at least one neighbour inside the cluster and at
    least one outside.  ``A = |W|``, ``B`` counts cluster CNs adjacent to
    ``W``, ``edges_in``/``edges_out`` count edges from ``W`` into / out of the
    cluster and ``zeta`` is their sum.  ``n_neighbors`` is ``|N_V(C_u)|``.
    """

    W: tuple[int, ...]
    A: int
    B: int
    edges_in: int
    edges_out: int
    zeta: int
    n_neighbors: int

    def to_dict(self) -> dict:
        return {
            "W": list(self.W),
            "A": self.A,
            "B": self.B,
            "edges_in": self.edges_in,
            "edges_out": self.edges_out,
            "zeta": self.zeta,
            "n_neighbors": self.n_neighbors,
        }


def _ccs_counts(H: ParityCheckMatrix, cluster: set[int]) -> CCSReport:
    nbrs = sorted({v for c in cluster for v in H.rows[c]})
    W, b_set = [], set()
    e_in = e_out = 0
    for v in nbrs:
        inside = [c for c in H.cols[v] if c in cluster]
        outside = len(H.cols[v]) - len(inside)
        if outside:
            W.append(v)
            b_set.update(inside)
            e_in += len(inside)
            e_out += outside
    return CCSReport(tuple(W), len(W), len(b_set), e_in, e_out, e_in + e_out, len(nbrs))


def _as_cluster(H: ParityCheckMatrix, C_u) -> set[int]:
    cluster = {int(c) for c in C_u}
    if len(cluster) != len(list(C_u)):
        raise ValueError("cluster has repeated CNs")
    if any(not 0 <= c < H.m for c in cluster):
        raise ValueError(f"cluster CN index outside [0, {H.m})")
    return cluster


def ccs(G: TannerGraph | ParityCheckMatrix, C_u: Iterable[int]) -> CCSReport:
    """CCS report for a proper, nonempty CN cluster."""
    H = as_matrix(G)
    cluster = _as_cluster(H, list(C_u))
    if not cluster or len(cluster) == H.m:
        raise ValueError("cluster must be a nonempty proper subset of the CNs")
    return _ccs_counts(H, cluster)


def zeta(G: TannerGraph | ParityCheckMatrix, C_u: Iterable[int]) -> int:
    """Edges joining ``C_u`` to its complement through the CCS; 0 for the full CN set."""
    H = as_matrix(G)
    cluster = _as_cluster(H, list(C_u))
    if not cluster:
        raise ValueError("cluster must be nonempty")
    if len(cluster) == H.m:
        return 0
    return _ccs_counts(H, cluster).zeta


def neighborhood_size(G: TannerGraph | ParityCheckMatrix, C_u: Iterable[int]) -> int:
    """``|N_V(C_u)|``."""
    H = as_matrix(G)
    return len({v for c in C_u for v in H.rows[int(c)]})


def ccs_bounds_regular(j: int, k: int, z: int, v: int) -> tuple[int, int]:
    """Interval for ``|W|`` in a (j, k)-regular graph with ``|N_V(C_u)| = v``.

    lower = v - floor(k z / j), upper = min(j v - k z, v).
    """
    return v - (k * z) // j, min(j * v - k * z, v)


@dataclass(frozen=True)
class ABBound:
    """Bound on ``|W|`` for an H(3, p) cluster.

    ``exact`` is the rational value of the bound; ``value`` is the integer
    actually compared against ``|W|`` (ceiling for lower bounds).
    """

    kind: str
    side: str  # "lower", "upper" or "exact"
    exact: Fraction
    value: int

    def holds(self, A: int) -> bool:
        if self.side == "lower":
            return A >= self.value
        if self.side == "upper":
            return A <= self.value
        return A == self.value


AB_BOUND_KINDS = ("generic", "same_row_group", "triple_6cycles")


def ccs_bounds_ab(p: int, z: int, kind: str) -> ABBound:
    """CCS-size bounds specific to array-based codes H(3, p).

    ``generic``: |W| >= ((1 + 2p) z - z^2) / 4 for 1 <= z <= p.
    ``same_row_group``: |W| = z p when all cluster CNs share a row group.
    ``triple_6cycles``: |W| <= z p - z for 3 <= z < p when the cluster is a
    union of CN triples of 6-cycles.
    """
    if kind not in AB_BOUND_KINDS:
        raise ValueError(f"kind must be one of {AB_BOUND_KINDS}, got {kind!r}")
    if not 1 <= z <= p:
        raise ValueError(f"need 1 <= z <= p, got z={z}, p={p}")
    if kind == "generic":
        q = Fraction((1 + 2 * p) * z - z * z, 4)
        return ABBound(kind, "lower", q, math.ceil(q))
    if kind == "same_row_group":
        return ABBound(kind, "exact", Fraction(z * p), z * p)
    if not 3 <= z < p:
        raise ValueError(f"triple_6cycles needs 3 <= z < p, got z={z}, p={p}")
    return ABBound(kind, "upper", Fraction(z * p - z), z * p - z)
