"""numba kernels shared by the BP decoders and the Q-learning trainer.

All kernels operate on a :class:`~ldpcsched.tanner.Graph` and a :class:`Work`
bundle of per-frame arrays.  The Python-level operations in ``bp`` and ``rl``
are thin wrappers over these, so the unit-tested path and the Monte Carlo
path run the same code.
"""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np
from numba import njit

SATURATION = 30.0
ATANH_CLAMP = 1.0 - 1e-12

# indices into Work.counters
CN2VN = 0
VN2CN = 1
SCHED = 2
RESID = 3
UNSAT = 4
N_COUNTERS = 5


class Work(NamedTuple):
    channel: np.ndarray  # (n,) channel LLRs
    c2v: np.ndarray  # (E,) committed CN -> VN messages
    v2c: np.ndarray  # (E,) VN -> CN messages
    posterior: np.ndarray  # (n,)
    soft: np.ndarray  # (m,) soft syndrome
    hard: np.ndarray  # (n,) uint8 hard decisions
    parity: np.ndarray  # (m,) uint8 hard-decision syndrome
    counters: np.ndarray  # (N_COUNTERS,) int64
    prev_c2v: np.ndarray  # (E,) outputs of the last fired CN from just before it fired


def new_work(m: int, n: int, E: int) -> Work:
    return Work(
        np.zeros(n),
        np.zeros(E),
        np.zeros(E),
        np.zeros(n),
        np.zeros(m),
        np.zeros(n, dtype=np.uint8),
        np.zeros(m, dtype=np.uint8),
        np.zeros(N_COUNTERS, dtype=np.int64),
        np.zeros(E),
    )


# ---------------------------------------------------------------------------
# message rules


@njit(cache=True, nogil=True)
def _box(p):
    if p > ATANH_CLAMP:
        p = ATANH_CLAMP
    elif p < -ATANH_CLAMP:
        p = -ATANH_CLAMP
    x = 2.0 * math.atanh(p)
    if x > SATURATION:
        return SATURATION
    if x < -SATURATION:
        return -SATURATION
    return x


@njit(cache=True, nogil=True)
def cn_compute(g, c, v2c, dst):
    """Sum-product outputs of CN ``c`` from ``v2c``, written to ``dst[edges of c]``."""
    start = g.cn_ptr[c]
    stop = g.cn_ptr[c + 1]
    # prefix products first, then fold in suffix products right to left
    p = 1.0
    for e in range(start, stop):
        dst[e] = p
        p *= math.tanh(0.5 * v2c[e])
    s = 1.0
    for e in range(stop - 1, start - 1, -1):
        t = math.tanh(0.5 * v2c[e])
        dst[e] = _box(dst[e] * s)
        s *= t


@njit(cache=True, nogil=True)
def cn_residual(g, c, c2v, prov):
    r = 0.0
    for e in range(g.cn_ptr[c], g.cn_ptr[c + 1]):
        d = abs(prov[e] - c2v[e])
        if d > r:
            r = d
    return r


@njit(cache=True, nogil=True)
def _set_hard(g, w, v, bit):
    if w.hard[v] != bit:
        w.hard[v] = bit
        for i in range(g.vn_ptr[v], g.vn_ptr[v + 1]):
            c = g.edge_cn[g.vn_edge[i]]
            if w.parity[c]:
                w.parity[c] = 0
                w.counters[UNSAT] -= 1
            else:
                w.parity[c] = 1
                w.counters[UNSAT] += 1


@njit(cache=True, nogil=True)
def vn_update(g, w, v, skip):
    """Refresh VN ``v``: extrinsic messages to every CN but ``skip`` and its posterior."""
    lo = g.vn_ptr[v]
    hi = g.vn_ptr[v + 1]
    total = w.channel[v]
    for i in range(lo, hi):
        total += w.c2v[g.vn_edge[i]]
    sent = 0
    for i in range(lo, hi):
        e = g.vn_edge[i]
        if g.edge_cn[e] != skip:
            w.v2c[e] = total - w.c2v[e]
            sent += 1
    w.posterior[v] = total
    w.counters[VN2CN] += sent
    _set_hard(g, w, v, 1 if total < 0.0 else 0)


@njit(cache=True, nogil=True)
def soft_syndrome_of(g, w, c):
    s = 0.0
    for e in range(g.cn_ptr[c], g.cn_ptr[c + 1]):
        s += w.posterior[g.cn_vn[e]]
    return s


@njit(cache=True, nogil=True)
def init_work(g, w, llr):
    m = g.cn_ptr.shape[0] - 1
    n = g.vn_ptr.shape[0] - 1
    for i in range(w.counters.shape[0]):
        w.counters[i] = 0
    for v in range(n):
        w.channel[v] = llr[v]
        w.posterior[v] = llr[v]
        w.hard[v] = 1 if llr[v] < 0.0 else 0
    for e in range(g.cn_vn.shape[0]):
        w.c2v[e] = 0.0
        w.v2c[e] = llr[g.cn_vn[e]]
    unsat = 0
    for c in range(m):
        par = 0
        for e in range(g.cn_ptr[c], g.cn_ptr[c + 1]):
            par ^= w.hard[g.cn_vn[e]]
        w.parity[c] = par
        unsat += par
        w.soft[c] = soft_syndrome_of(g, w, c)
    w.counters[UNSAT] = unsat


@njit(cache=True, nogil=True)
def cn_update(g, w, c):
    cn_compute(g, c, w.v2c, w.c2v)
    w.counters[CN2VN] += g.cn_ptr[c + 1] - g.cn_ptr[c]


@njit(cache=True, nogil=True)
def schedule_cn(g, w, a):
    """One sequential step: CN ``a`` fires, its VNs answer, soft syndromes refresh."""
    for e in range(g.cn_ptr[a], g.cn_ptr[a + 1]):
        w.prev_c2v[e] = w.c2v[e]
    cn_update(g, w, a)
    for e in range(g.cn_ptr[a], g.cn_ptr[a + 1]):
        vn_update(g, w, g.cn_vn[e], a)
    for e in range(g.cn_ptr[a], g.cn_ptr[a + 1]):
        v = g.cn_vn[e]
        for i in range(g.vn_ptr[v], g.vn_ptr[v + 1]):
            c = g.edge_cn[g.vn_edge[i]]
            w.soft[c] = soft_syndrome_of(g, w, c)
    w.counters[SCHED] += 1


# ---------------------------------------------------------------------------
# non-learned decoders


@njit(cache=True, nogil=True)
def flooding_frame(g, w, llr, max_iters):
    init_work(g, w, llr)
    m = g.cn_ptr.shape[0] - 1
    n = g.vn_ptr.shape[0] - 1
    it = 0
    while w.counters[UNSAT] > 0 and it < max_iters:
        for c in range(m):
            cn_update(g, w, c)
        for v in range(n):
            vn_update(g, w, v, -1)
        w.counters[SCHED] += m
        it += 1
    return it


@njit(cache=True, nogil=True)
def ns_frame(g, w, llr, budget, prov, res, mark):
    """Residual (node-wise) scheduling of one frame."""
    init_work(g, w, llr)
    m = g.cn_ptr.shape[0] - 1
    if w.counters[UNSAT] == 0:
        return
    for c in range(m):
        cn_compute(g, c, w.v2c, prov)
        res[c] = cn_residual(g, c, w.c2v, prov)
        w.counters[RESID] += 1
        mark[c] = False
    while w.counters[SCHED] < budget:
        a = 0
        best = res[0]
        for c in range(1, m):
            if res[c] > best:
                best = res[c]
                a = c
        if best <= 0.0:
            break  # fixed point: no CN has anything new to send
        schedule_cn(g, w, a)
        res[a] = 0.0
        for e in range(g.cn_ptr[a], g.cn_ptr[a + 1]):
            v = g.cn_vn[e]
            for i in range(g.vn_ptr[v], g.vn_ptr[v + 1]):
                c = g.edge_cn[g.vn_edge[i]]
                if c != a and not mark[c]:
                    mark[c] = True
                    cn_compute(g, c, w.v2c, prov)
                    res[c] = cn_residual(g, c, w.c2v, prov)
                    w.counters[RESID] += 1
        for e in range(g.cn_ptr[a], g.cn_ptr[a + 1]):
            v = g.cn_vn[e]
            for i in range(g.vn_ptr[v], g.vn_ptr[v + 1]):
                mark[g.edge_cn[g.vn_edge[i]]] = False
        if w.counters[UNSAT] == 0:
            break


# ---------------------------------------------------------------------------
# clustered Q-learning


class ClusterLayout(NamedTuple):
    """Flat description of a clustering and its Q-table for the kernels."""

    q_off: np.ndarray  # (U,) offset of cluster u's block in the flat Q array
    sizes: np.ndarray  # (U,) z_u
    cl_ptr: np.ndarray  # (U + 1,) range into cl_cn
    cl_cn: np.ndarray  # (m,) CNs cluster by cluster, within-cluster order
    u_of: np.ndarray  # (m,) cluster of each CN
    pos_of: np.ndarray  # (m,) within-cluster position of each CN
    powers: np.ndarray  # (z_max,) M**i
    thresholds: np.ndarray  # (M - 1,) ascending


@njit(cache=True, nogil=True)
def quantize_level(thresholds, x):
    # number of thresholds strictly below x: ties go to the lower level
    lvl = 0
    for t in thresholds:
        if x > t:
            lvl += 1
    return lvl


class Policy(NamedTuple):
    """Per-frame bookkeeping of the learned scheduler."""

    levels: np.ndarray  # (m,) quantization level of each CN's soft syndrome
    cstate: np.ndarray  # (U,) state index of each cluster
    stale: np.ndarray  # (m,) bool: inputs unchanged since the CN last fired
    last: np.ndarray  # (m,) step of the CN's latest firing, -1 if never
    fires: np.ndarray  # (m,) times the CN has fired


def new_policy(m: int, n_clusters: int) -> Policy:
    return Policy(
        np.zeros(m, dtype=np.int64),
        np.zeros(n_clusters, dtype=np.int64),
        np.zeros(m, dtype=np.bool_),
        np.full(m, -1, dtype=np.int64),
        np.zeros(m, dtype=np.int64),
    )


@njit(cache=True, nogil=True)
def init_cluster_states(g, w, lay, levels, cstate):
    m = g.cn_ptr.shape[0] - 1
    for u in range(cstate.shape[0]):
        cstate[u] = 0
    for c in range(m):
        lvl = quantize_level(lay.thresholds, w.soft[c])
        levels[c] = lvl
        cstate[lay.u_of[c]] += lvl * lay.powers[lay.pos_of[c]]


@njit(cache=True, nogil=True)
def init_policy(g, w, lay, ps):
    init_cluster_states(g, w, lay, ps.levels, ps.cstate)
    for c in range(ps.stale.shape[0]):
        ps.stale[c] = False
        ps.last[c] = -1
        ps.fires[c] = 0


@njit(cache=True, nogil=True)
def _requantize(lay, w, c, levels, cstate):
    lvl = quantize_level(lay.thresholds, w.soft[c])
    if lvl != levels[c]:
        cstate[lay.u_of[c]] += (lvl - levels[c]) * lay.powers[lay.pos_of[c]]
        levels[c] = lvl


@njit(cache=True, nogil=True)
def after_schedule(g, w, lay, a, ps):
    """Requantize every CN whose soft syndrome moved.

    CN ``a`` goes stale: firing it again would resend the same messages.  A
    CN stops being stale once one of its incoming messages changes, which
    happens exactly when ``a`` sent a new value to a VN they share.
    """
    ps.stale[a] = True
    ps.last[a] = w.counters[SCHED]
    ps.fires[a] += 1
    for e in range(g.cn_ptr[a], g.cn_ptr[a + 1]):
        v = g.cn_vn[e]
        moved = w.c2v[e] != w.prev_c2v[e]
        for i in range(g.vn_ptr[v], g.vn_ptr[v + 1]):
            c = g.edge_cn[g.vn_edge[i]]
            if c != a and moved:
                ps.stale[c] = False
            _requantize(lay, w, c, ps.levels, ps.cstate)


@njit(cache=True, nogil=True)
def greedy_action(q, lay, ps, cap):
    """Global argmax over (cluster, action) of Q(s_u, a_u).

    Skips stale CNs and, when ``cap > 0``, CNs already fired ``cap`` times.
    Equal values go to the CN fired least recently, then to the lowest
    (u, a); an all-zero table therefore sweeps the CNs round-robin.
    Returns (-1, -1) when no CN is eligible.
    """
    best_u = -1
    best_a = -1
    best = -np.inf
    best_last = 0
    for u in range(lay.sizes.shape[0]):
        z = lay.sizes[u]
        base = lay.q_off[u] + ps.cstate[u] * z
        for a in range(z):
            c = lay.cl_cn[lay.cl_ptr[u] + a]
            if ps.stale[c] or (cap > 0 and ps.fires[c] >= cap):
                continue
            val = q[base + a]
            if val > best or (val == best and ps.last[c] < best_last):
                best = val
                best_last = ps.last[c]
                best_u = u
                best_a = a
    return best_u, best_a


@njit(cache=True, nogil=True)
def epsilon_greedy_action(q, lay, ps, epsilon, u0, u1, u2):
    """Map three U[0,1) draws to a (cluster, action) pair.

    ``u0 < epsilon`` explores: cluster ``floor(u1 * U)``, action
    ``floor(u2 * z_u)``.  Otherwise the greedy choice (uncapped); if every
    CN is stale the exploratory pair is used instead.
    """
    n_clusters = lay.sizes.shape[0]
    if u0 >= epsilon:
        u, a = greedy_action(q, lay, ps, 0)
        if u >= 0:
            return u, a
    u = min(int(u1 * n_clusters), n_clusters - 1)
    z = lay.sizes[u]
    a = min(int(u2 * z), z - 1)
    return u, a


@njit(cache=True, nogil=True)
def best_next_value(q, lay, cstate):
    best = -np.inf
    for u in range(lay.sizes.shape[0]):
        z = lay.sizes[u]
        base = lay.q_off[u] + cstate[u] * z
        for a in range(z):
            if q[base + a] > best:
                best = q[base + a]
    return best


@njit(cache=True, nogil=True)
def q_update_flat(q, lay, u, s, a, reward, cstate_next, alpha, beta):
    idx = lay.q_off[u] + s * lay.sizes[u] + a
    boot = best_next_value(q, lay, cstate_next)
    q[idx] = (1.0 - alpha) * q[idx] + alpha * (reward + beta * boot)
    return q[idx]


@njit(cache=True, nogil=True)
def train_batch(g, w, lay, q, llrs, draws, ell_max, alpha, beta, epsilon, prov, ps):
    """Clustered Q-learning over a batch of channel LLR vectors.

    ``draws[b, l]`` holds the three uniforms consumed by the epsilon-greedy
    choice of step ``l`` of sample ``b``.
    """
    for b in range(llrs.shape[0]):
        init_work(g, w, llrs[b])
        init_policy(g, w, lay, ps)
        for ell in range(ell_max):
            u, a = epsilon_greedy_action(q, lay, ps, epsilon, draws[b, ell, 0], draws[b, ell, 1], draws[b, ell, 2])
            c = lay.cl_cn[lay.cl_ptr[u] + a]
            s = ps.cstate[u]
            cn_compute(g, c, w.v2c, prov)
            reward = cn_residual(g, c, w.c2v, prov)
            w.counters[RESID] += 1
            schedule_cn(g, w, c)
            after_schedule(g, w, lay, c, ps)
            q_update_flat(q, lay, u, s, a, reward, ps.cstate, alpha, beta)


@njit(cache=True, nogil=True)
def mabns_frame(g, w, lay, q, llr, budget, cap, ps):
    """Greedy learned scheduling of one frame; no residuals are computed."""
    init_work(g, w, llr)
    init_policy(g, w, lay, ps)
    while w.counters[UNSAT] > 0 and w.counters[SCHED] < budget:
        u, a = greedy_action(q, lay, ps, cap)
        if u < 0:
            break
        c = lay.cl_cn[lay.cl_ptr[u] + a]
        schedule_cn(g, w, c)
        after_schedule(g, w, lay, c, ps)


# ---------------------------------------------------------------------------
# batch drivers for Monte Carlo

# columns of the per-trial record
OUT_COLS = ("bit_errors", "cn2vn", "vn2c", "schedulings", "converged", "residual_evals", "iterations")


@njit(cache=True, nogil=True)
def _record(w, out, t, it):
    n = w.hard.shape[0]
    errs = 0
    for v in range(n):
        errs += w.hard[v]
    out[t, 0] = errs
    out[t, 1] = w.counters[CN2VN]
    out[t, 2] = w.counters[VN2CN]
    out[t, 3] = w.counters[SCHED]
    out[t, 4] = 1 if w.counters[UNSAT] == 0 else 0
    out[t, 5] = w.counters[RESID]
    out[t, 6] = w.counters[SCHED] if it < 0 else it


@njit(cache=True, nogil=True)
def flooding_batch(g, w, llrs, max_iters, out):
    for t in range(llrs.shape[0]):
        it = flooding_frame(g, w, llrs[t], max_iters)
        _record(w, out, t, it)


@njit(cache=True, nogil=True)
def ns_batch(g, w, llrs, budget, prov, res, mark, out):
    for t in range(llrs.shape[0]):
        ns_frame(g, w, llrs[t], budget, prov, res, mark)
        _record(w, out, t, -1)


@njit(cache=True, nogil=True)
def mabns_batch(g, w, lay, q, llrs, budget, cap, ps, out):
    for t in range(llrs.shape[0]):
        mabns_frame(g, w, lay, q, llrs[t], budget, cap, ps)
        _record(w, out, t, -1)
