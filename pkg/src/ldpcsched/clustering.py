"""Partitioning the CN set into fixed-size clusters.

Four strategies: contiguous index blocks, a seeded random partition, the
cycle-maximising greedy heuristic, and an exhaustive greedy search that
minimises zeta (the number of edges tying a cluster to its complement)
step by step, practical only for small graphs.
"""

from __future__ import annotations

import hashlib
import itertools
import json
import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .analysis import enumerate_cycles, zeta
from .tanner import ParityCheckMatrix, TannerGraph, as_matrix

log = logging.getLogger(__name__)

DEFAULT_ENUMERATION_BUDGET = 2_000_000


@dataclass(frozen=True)
class Clustering:
    """Ordered partition of ``range(m)``.

    ``clusters[u]`` lists the CNs of cluster ``u`` in within-cluster order;
    that order fixes the positional encoding of the cluster state.
    """

    clusters: tuple[tuple[int, ...], ...]
    z: int
    membership: dict[int, tuple[int, int]] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        clusters = tuple(tuple(int(c) for c in cl) for cl in self.clusters)
        object.__setattr__(self, "clusters", clusters)
        if self.z < 1:
            raise ValueError("cluster size z must be >= 1")
        flat = [c for cl in clusters for c in cl]
        m = len(flat)
        if sorted(flat) != list(range(m)):
            raise ValueError("clusters must partition range(m) exactly")
        sizes = [len(cl) for cl in clusters]
        if any(s != self.z for s in sizes[:-1]) or not 1 <= sizes[-1] <= self.z:
            raise ValueError(f"every cluster but the last must have size {self.z}")
        if sizes[-1] != self.z and sizes[-1] != m % self.z:
            raise ValueError("the last cluster must hold the m mod z remainder")
        membership = {c: (u, pos) for u, cl in enumerate(clusters) for pos, c in enumerate(cl)}
        object.__setattr__(self, "membership", membership)

    @property
    def m(self) -> int:
        return len(self.membership)

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(len(cl) for cl in self.clusters)

    def __len__(self) -> int:
        return len(self.clusters)

    def fingerprint(self) -> str:
        h = hashlib.sha256()
        h.update(np.array([self.m, self.z, len(self.clusters)], dtype="<i8").tobytes())
        for cl in self.clusters:
            h.update(np.array([len(cl), *cl], dtype="<i8").tobytes())
        return h.hexdigest()

    def to_json(self) -> str:
        return json.dumps({"z": self.z, "clusters": [list(cl) for cl in self.clusters]})

    @classmethod
    def from_json(cls, text: str) -> "Clustering":
        obj = json.loads(text)
        if isinstance(obj, list):
            clusters = obj
            z = max(len(cl) for cl in clusters)
        else:
            clusters, z = obj["clusters"], int(obj["z"])
        return cls(tuple(tuple(cl) for cl in clusters), z)


def _check_sizes(m: int, z: int) -> None:
    if m < 1:
        raise ValueError("m must be positive")
    if not 1 <= z <= m:
        raise ValueError(f"cluster size must satisfy 1 <= z <= m, got z={z}, m={m}")


def _chop(order: Sequence[int], z: int) -> Clustering:
    order = list(order)
    return Clustering(tuple(tuple(order[i : i + z]) for i in range(0, len(order), z)), z)


def cluster_contiguous(m: int, z: int) -> Clustering:
    _check_sizes(m, z)
    return _chop(range(m), z)


def cluster_random(m: int, z: int, seed: int = 0) -> Clustering:
    _check_sizes(m, z)
    rng = np.random.default_rng(seed)
    return _chop(rng.permutation(m).tolist(), z)


def cycle_cn_sets(G: TannerGraph | ParityCheckMatrix, kappa: int) -> list[tuple[int, ...]]:
    """CN sets ``S_x`` of every length-``kappa`` cycle, in enumeration order."""
    return [tuple(sorted(cy.cns)) for cy in enumerate_cycles(G, kappa)]


def cluster_cycle_optimized(
    G: TannerGraph | ParityCheckMatrix,
    z: int,
    kappa: int = 6,
    seed: int = 0,
) -> Clustering:
    """Greedy clusters that keep short cycles inside clusters.

    Only cycles whose CNs are all still unclustered ("live" cycles) count.
    Each step takes the unclustered CN ``c*`` on the most live cycles and
    pools the CNs of those cycles.  Starting from ``c*`` it then adds, one at
    a time, the pool member that completes the most of ``c*``'s live cycles
    inside the cluster (ties: most live cycles shared with ``c*``, then
    lowest index).  A pool smaller than ``z - 1`` is kept whole and
    padded with uniformly drawn unclustered CNs.  Without any ``kappa``-cycle
    the result is exactly ``cluster_random(m, z, seed)``.
    """
    H = as_matrix(G)
    _check_sizes(H.m, z)
    sets = cycle_cn_sets(H, kappa)
    if not sets:
        log.warning("no %d-cycles found; cycle-optimised clustering falls back to random", kappa)
        return cluster_random(H.m, z, seed)

    rng = np.random.default_rng(seed)
    containing: list[list[int]] = [[] for _ in range(H.m)]
    for x, S in enumerate(sets):
        for c in S:
            containing[c].append(x)
    alive = np.ones(len(sets), dtype=bool)

    free = np.ones(H.m, dtype=bool)
    clusters: list[tuple[int, ...]] = []
    while free.any():
        if int(free.sum()) <= z:
            clusters.append(tuple(int(c) for c in np.flatnonzero(free)))
            break
        freq = np.array([int(alive[containing[c]].sum()) if free[c] else -1 for c in range(H.m)])
        c_star = int(np.argmax(freq))  # first maximum == lowest index
        live = [sets[x] for x in containing[c_star] if alive[x]]
        pool = sorted({c for S in live for c in S} - {c_star})

        chosen = [c_star]
        inside = {c_star}
        while len(chosen) < z and len(chosen) <= len(pool):
            best_key, best = None, -1
            for c in pool:
                if c in inside:
                    continue
                mine = [S for S in live if c in S]
                done = sum(1 for S in mine if all(d in inside or d == c for d in S))
                key = (-done, -len(mine), c)
                if best_key is None or key < best_key:
                    best_key, best = key, c
            chosen.append(best)
            inside.add(best)
        if len(chosen) < z:
            rest = np.flatnonzero(free)
            rest = rest[~np.isin(rest, chosen)]
            chosen += rng.choice(rest, size=z - len(chosen), replace=False).tolist()
        chosen = [int(c) for c in chosen]
        free[chosen] = False
        for c in chosen:
            alive[containing[c]] = False
        clusters.append(tuple(chosen))
    return Clustering(tuple(clusters), z)


def cluster_exhaustive(
    G: TannerGraph | ParityCheckMatrix,
    z: int,
    budget: int = DEFAULT_ENUMERATION_BUDGET,
) -> Clustering:
    """Step-wise exact zeta minimisation over all size-``z`` subsets.

    Step ``e`` picks, among the CNs not yet clustered, the size-``z`` subset
    with the smallest zeta; ties go to the lexicographically smallest sorted
    index tuple.  Whatever remains after the last full step is the final
    cluster.  Raises ``ValueError`` when any step would enumerate more than
    ``budget`` subsets.
    """
    H = as_matrix(G)
    _check_sizes(H.m, z)
    if math.comb(H.m, z) > budget:
        raise ValueError(f"C({H.m}, {z}) = {math.comb(H.m, z)} subsets exceeds the budget {budget}")
    remaining = list(range(H.m))
    clusters: list[tuple[int, ...]] = []
    while len(remaining) > z:
        best, best_zeta = None, None
        for cand in itertools.combinations(remaining, z):
            val = zeta(H, cand)
            if best_zeta is None or val < best_zeta:
                best, best_zeta = cand, val
        clusters.append(best)
        remaining = [c for c in remaining if c not in best]
    clusters.append(tuple(remaining))
    return Clustering(tuple(clusters), z)


def clustering_zetas(G: TannerGraph | ParityCheckMatrix, clustering: Clustering) -> list[int]:
    H = as_matrix(G)
    return [zeta(H, cl) for cl in clustering.clusters]
