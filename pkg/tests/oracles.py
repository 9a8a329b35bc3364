"""Independent reference implementations used as test oracles.

Each one is written from the textbook definition on dense matrices or with a
third-party graph library, sharing no code with the package under test.
"""

from __future__ import annotations

import itertools
import math

import networkx as nx
import numpy as np


def ab_dense(gamma: int, p: int) -> np.ndarray:
    """H(gamma, p) from rolled identity blocks."""
    eye = np.eye(p, dtype=np.uint8)
    return np.block([[np.roll(eye, -((r * c) % p), axis=1) for c in range(p)] for r in range(gamma)])


def tanner_nx(H: np.ndarray) -> nx.Graph:
    m, n = H.shape
    G = nx.Graph()
    G.add_nodes_from(("c", i) for i in range(m))
    G.add_nodes_from(("v", i) for i in range(n))
    G.add_edges_from((("c", c), ("v", v)) for c, v in zip(*np.nonzero(H)))
    return G


def cycle_count_nx(H: np.ndarray, kappa: int) -> int:
    return sum(1 for cy in nx.simple_cycles(tanner_nx(H), length_bound=kappa) if len(cy) == kappa)


def cycle_cn_sets_nx(H: np.ndarray, kappa: int) -> set[frozenset]:
    out = set()
    for cy in nx.simple_cycles(tanner_nx(H), length_bound=kappa):
        if len(cy) == kappa:
            out.add(frozenset(i for kind, i in cy if kind == "c"))
    return out


def girth_nx(H: np.ndarray) -> float:
    return nx.girth(tanner_nx(H))


def syndrome_dense(H: np.ndarray, x: np.ndarray) -> np.ndarray:
    return (H.astype(np.int64) @ x.astype(np.int64)) % 2


def ccs_dense(H: np.ndarray, cluster) -> dict:
    """CCS quantities by plain set logic on dense H."""
    m, n = H.shape
    inside = np.zeros(m, dtype=bool)
    inside[list(cluster)] = True
    deg_in = H[inside].sum(axis=0)
    deg_out = H[~inside].sum(axis=0)
    W = np.flatnonzero((deg_in > 0) & (deg_out > 0))
    B = np.flatnonzero(H[np.ix_(inside, W)].any(axis=1)) if W.size else np.array([], dtype=int)
    return {
        "W": W.tolist(),
        "A": int(W.size),
        "B": int(B.size),
        "edges_in": int(deg_in[W].sum()),
        "edges_out": int(deg_out[W].sum()),
        "zeta": int(deg_in[W].sum() + deg_out[W].sum()),
        "n_neighbors": int((deg_in > 0).sum()),
    }


def zeta_dense(H: np.ndarray, cluster) -> int:
    if len(cluster) == H.shape[0]:
        return 0
    return ccs_dense(H, cluster)["zeta"]


def _subsets(items: list[int], z: int):
    """All size-z subsets in lexicographic order, by plain recursion."""
    if z == 0:
        yield ()
        return
    for i in range(len(items) - z + 1):
        for rest in _subsets(items[i + 1 :], z - 1):
            yield (items[i],) + rest


def greedy_zeta_partition(H: np.ndarray, z: int) -> list[tuple[int, ...]]:
    """Stepwise argmin-zeta partition with lexicographic tie-breaking."""
    remaining = list(range(H.shape[0]))
    out = []
    while len(remaining) > z:
        scored = [(zeta_dense(H, s), s) for s in _subsets(remaining, z)]
        best = min(scored)  # tuple order: zeta first, then lexicographic
        out.append(best[1])
        remaining = [c for c in remaining if c not in best[1]]
    out.append(tuple(remaining))
    return out


# ---------------------------------------------------------------------------
# message passing


def _phi_pair(values: np.ndarray) -> float:
    prod = np.prod(np.tanh(values / 2.0))
    prod = np.clip(prod, -(1 - 1e-12), 1 - 1e-12)
    return float(np.clip(2.0 * np.arctanh(prod), -30.0, 30.0))


def cn_messages_dense(H: np.ndarray, v2c: np.ndarray, c: int) -> dict[int, float]:
    """Outgoing messages of CN c from a dense (m, n) message array."""
    vs = np.flatnonzero(H[c])
    return {int(v): _phi_pair(np.array([v2c[c, u] for u in vs if u != v])) for v in vs}


def vn_messages_dense(H: np.ndarray, c2v: np.ndarray, llr: np.ndarray, v: int) -> tuple[dict[int, float], float]:
    cs = np.flatnonzero(H[:, v])
    out = {int(c): float(llr[v] + sum(c2v[d, v] for d in cs if d != c)) for c in cs}
    return out, float(llr[v] + c2v[cs, v].sum())


def flooding_dense(H: np.ndarray, llr: np.ndarray, max_iters: int, stop: bool = True):
    """Dense flooding sum-product; returns (hard decision, iterations, posterior)."""
    m, n = H.shape
    mask = H.astype(bool)
    v2c = np.where(mask, llr[None, :], 0.0)
    c2v = np.zeros((m, n))
    post = llr.copy()
    hard = (post < 0).astype(np.int64)
    it = 0
    while it < max_iters and not (stop and not syndrome_dense(H, hard).any()):
        for c in range(m):
            for v, msg in cn_messages_dense(H, v2c, c).items():
                c2v[c, v] = msg
        post = llr + (c2v * mask).sum(axis=0)
        v2c = np.where(mask, post[None, :] - c2v, 0.0)
        hard = (post < 0).astype(np.int64)
        it += 1
    return hard, it, post


def exact_posteriors(H: np.ndarray, llr: np.ndarray) -> np.ndarray:
    """Bitwise MAP LLRs log P(x_i=0|y)/P(x_i=1|y) by enumerating every codeword."""
    m, n = H.shape
    num = np.zeros(n)
    den = np.zeros(n)
    scores = []
    words = []
    for bits in itertools.product((0, 1), repeat=n):
        x = np.array(bits)
        if syndrome_dense(H, x).any():
            continue
        words.append(x)
        scores.append(-float(np.dot(llr, x)))  # P(x|y) ∝ exp(-sum_i x_i L_i)
    scores = np.array(scores)
    w = np.exp(scores - scores.max())
    for x, wt in zip(words, w):
        num += wt * (x == 0)
        den += wt * (x == 1)
    return np.log(num) - np.log(den)


def normal_quantile_975() -> float:
    return math.sqrt(2.0) * 1.3859038243496777  # sqrt(2) * erfinv(0.95)


def gf2_nullspace(H: np.ndarray) -> np.ndarray:
    """Basis (rows) of the binary null space of H by Gaussian elimination."""
    A = H.astype(np.uint8).copy() % 2
    m, n = A.shape
    pivots = []
    r = 0
    for c in range(n):
        hit = [i for i in range(r, m) if A[i, c]]
        if not hit:
            continue
        A[[r, hit[0]]] = A[[hit[0], r]]
        for i in range(m):
            if i != r and A[i, c]:
                A[i] ^= A[r]
        pivots.append(c)
        r += 1
        if r == m:
            break
    free = [c for c in range(n) if c not in pivots]
    basis = []
    for f in free:
        x = np.zeros(n, dtype=np.uint8)
        x[f] = 1
        for i, p in enumerate(pivots):
            x[p] = A[i, f]
        basis.append(x)
    return np.array(basis, dtype=np.uint8).reshape(len(basis), n)


def ns_dense(H: np.ndarray, llr: np.ndarray, budget: int):
    """Plain residual scheduling: recompute every residual before each pick.

    Returns (hard decision, schedulings, CN->VN message count, schedule).
    """
    m, n = H.shape
    mask = H.astype(bool)
    c2v = np.zeros((m, n))
    v2c = np.where(mask, llr[None, :], 0.0)
    post = llr.astype(float).copy()
    order = []
    msgs = 0
    while len(order) < budget:
        if not syndrome_dense(H, (post < 0).astype(np.int64)).any():
            break
        res = np.zeros(m)
        new = {}
        for c in range(m):
            new[c] = cn_messages_dense(H, v2c, c)
            res[c] = max(abs(mv - c2v[c, v]) for v, mv in new[c].items())
        a = int(np.argmax(res))
        if res[a] <= 0:
            break
        for v, mv in new[a].items():
            c2v[a, v] = mv
        msgs += len(new[a])
        order.append(a)
        for v in new[a]:
            post[v] = llr[v] + c2v[mask[:, v], v].sum()
            for c in np.flatnonzero(mask[:, v]):
                if c != a:
                    v2c[c, v] = post[v] - c2v[c, v]
    return (post < 0).astype(np.uint8), len(order), msgs, order
