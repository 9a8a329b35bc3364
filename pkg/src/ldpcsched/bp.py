"""Belief-propagation message passing: node updates, residuals, and the
flooding and residual-scheduled (NS) decoders.

LLR convention: ``L = log P(x=0|y) / P(x=1|y)``; the hard decision is 1
exactly when the posterior is negative.  CN updates use the exact tanh rule
with the atanh argument clamped to ``+-(1 - 1e-12)`` and outputs saturated
at ``+-30``.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .tanner import ParityCheckMatrix


class DecoderState:
    """Mutable message state of one frame on one code.

    Initialised as a sequential decoder starts: every CN -> VN message is 0,
    every VN -> CN message equals the channel LLR of its VN, posteriors equal
    the channel LLRs and the soft syndrome of CN ``c`` is the sum of the
    posteriors it checks.
    """

    def __init__(self, H: ParityCheckMatrix, llr):
        llr = np.asarray(llr, dtype=np.float64)
        if llr.shape != (H.n,):
            raise ValueError(f"channel LLR vector must have length {H.n}, got shape {llr.shape}")
        if not np.isfinite(llr).all():
            raise ValueError("channel LLRs must be finite")
        self.H = H
        self.work = K.new_work(H.m, H.n, H.num_edges)
        K.init_work(H.graph, self.work, llr)

    channel = property(lambda self: self.work.channel)
    c2v = property(lambda self: self.work.c2v)
    v2c = property(lambda self: self.work.v2c)
    posterior = property(lambda self: self.work.posterior)
    soft_syndrome = property(lambda self: self.work.soft)

    @property
    def cn2vn_messages(self) -> int:
        return int(self.work.counters[K.CN2VN])

    @property
    def vn2cn_messages(self) -> int:
        return int(self.work.counters[K.VN2CN])

    @property
    def schedulings(self) -> int:
        return int(self.work.counters[K.SCHED])

    @property
    def unsatisfied(self) -> int:
        """Number of unsatisfied checks under the current hard decision."""
        return int(self.work.counters[K.UNSAT])

    def hard_decision(self) -> np.ndarray:
        return self.work.hard.copy()

    def edge(self, c: int, v: int) -> int:
        """Edge id of ``(c, v)``; KeyError if they are not adjacent."""
        g = self.H.graph
        lo, hi = int(g.cn_ptr[c]), int(g.cn_ptr[c + 1])
        hit = np.flatnonzero(g.cn_vn[lo:hi] == v)
        if hit.size == 0:
            raise KeyError(f"CN {c} and VN {v} are not adjacent")
        return lo + int(hit[0])

    def digest(self) -> str:
        h = hashlib.sha256()
        for arr in self.work:
            h.update(np.ascontiguousarray(arr).tobytes())
        return h.hexdigest()

    def copy(self) -> "DecoderState":
        new = object.__new__(DecoderState)
        new.H = self.H
        new.work = K.Work(*(a.copy() for a in self.work))
        return new


@dataclass(frozen=True)
class DecodeResult:
    xhat: np.ndarray
    converged: bool
    cn2vn_messages: int
    vn2cn_messages: int
    schedulings: int
    iterations: int
    residual_evaluations: int = 0


def _result(state: DecoderState, iterations: int | None = None) -> DecodeResult:
    c = state.work.counters
    return DecodeResult(
        xhat=state.hard_decision(),
        converged=bool(c[K.UNSAT] == 0),
        cn2vn_messages=int(c[K.CN2VN]),
        vn2cn_messages=int(c[K.VN2CN]),
        schedulings=int(c[K.SCHED]),
        iterations=int(c[K.SCHED]) if iterations is None else iterations,
        residual_evaluations=int(c[K.RESID]),
    )


def _check_cn(state: DecoderState, c: int) -> int:
    if not 0 <= c < state.H.m:
        raise IndexError(f"CN index {c} outside [0, {state.H.m})")
    return int(c)


def cn_update(state: DecoderState, c: int) -> np.ndarray:
    """Recompute and commit the outgoing messages of CN ``c``.

    Returns the new messages in the order of ``H.rows[c]``.
    """
    c = _check_cn(state, c)
    K.cn_update(state.H.graph, state.work, c)
    g = state.H.graph
    return state.work.c2v[g.cn_ptr[c] : g.cn_ptr[c + 1]].copy()


def vn_update(state: DecoderState, v: int, except_cn: int = -1) -> np.ndarray:
    """Recompute the extrinsic messages of VN ``v`` to every CN but ``except_cn``
    and refresh its posterior.  Returns the messages in ``H.cols[v]`` order."""
    if not 0 <= v < state.H.n:
        raise IndexError(f"VN index {v} outside [0, {state.H.n})")
    g = state.H.graph
    K.vn_update(g, state.work, int(v), int(except_cn))
    return state.work.v2c[g.vn_edge[g.vn_ptr[v] : g.vn_ptr[v + 1]]].copy()


def residual(state: DecoderState, a: int) -> tuple[np.ndarray, float]:
    """Per-edge residuals ``|m' - m|`` of CN ``a`` and their maximum.

    ``m'`` are the messages CN ``a`` would send if scheduled now; the state is
    left untouched.
    """
    a = _check_cn(state, a)
    g = state.H.graph
    prov = np.zeros(state.H.num_edges)
    K.cn_compute(g, a, state.work.v2c, prov)
    lo, hi = g.cn_ptr[a], g.cn_ptr[a + 1]
    r = np.abs(prov[lo:hi] - state.work.c2v[lo:hi])
    return r, float(r.max(initial=0.0))


def schedule_cn(state: DecoderState, a: int) -> None:
    """Fire CN ``a``; its VNs answer every other neighbour, posteriors and the
    soft syndromes of all CNs touching those VNs are refreshed."""
    a = _check_cn(state, a)
    K.schedule_cn(state.H.graph, state.work, a)


def decode_flooding(H: ParityCheckMatrix, llr, max_iters: int = 25) -> DecodeResult:
    """Parallel schedule: all CNs, then all VNs, per iteration.

    The hard decision is checked before the first iteration and after every
    one; decoding stops at the first zero syndrome.
    """
    state = DecoderState(H, llr)
    it = K.flooding_frame(H.graph, state.work, state.channel.copy(), int(max_iters))
    return _result(state, iterations=int(it))


def decode_ns(H: ParityCheckMatrix, llr, budget: int | None = None) -> DecodeResult:
    """Node-wise residual scheduling.

    Always fires the CN with the largest pending residual (ties: lowest
    index).  A fired CN's residual is zero until one of its inputs changes;
    only CNs whose inputs changed get their residual recomputed.  Stops on a
    zero syndrome, after ``budget`` schedulings (default ``25 * m``), or when
    no CN has a nonzero residual left.
    """
    if budget is None:
        budget = 25 * H.m
    state = DecoderState(H, llr)
    E = H.num_edges
    K.ns_frame(
        H.graph,
        state.work,
        state.channel.copy(),
        int(budget),
        np.zeros(E),
        np.zeros(H.m),
        np.zeros(H.m, dtype=np.bool_),
    )
    return _result(state)
