"""Clustered Q-learning of CN schedules and the learned sequential decoder.

The decoder state seen by the agent is the soft syndrome (per-CN sum of
posterior LLRs) passed through an M-level scalar quantizer.  Each cluster
observes only its own CNs: the state index of cluster ``u`` is the base-M
number whose digit ``i`` is the level of the cluster's ``i``-th CN.  A
scheduling action is a pair ``(u, a)``: fire the ``a``-th CN of cluster
``u``.
"""

from __future__ import annotations

import hashlib
import io
import struct
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from . import _kernels as K
from .bp import DecodeResult, DecoderState, _result
from .clustering import Clustering
from .tanner import ParityCheckMatrix


class FingerprintMismatch(ValueError):
    """A Q-table was used with a code or clustering it was not trained for."""


class QTableFormatError(ValueError):
    """Unreadable serialized Q-table."""


# ---------------------------------------------------------------------------
# quantizer and state encoding


@dataclass(frozen=True)
class Quantizer:
    """Scalar quantizer mapping a real to the index of its nearest
    representation point (ties to the lower level).

    ``thresholds`` must be the midpoints of consecutive ``rep_points``.
    """

    thresholds: tuple[float, ...]
    rep_points: tuple[float, ...]

    def __post_init__(self):
        th = tuple(float(t) for t in self.thresholds)
        rp = tuple(float(r) for r in self.rep_points)
        object.__setattr__(self, "thresholds", th)
        object.__setattr__(self, "rep_points", rp)
        if len(rp) < 2 or len(th) != len(rp) - 1:
            raise ValueError("need M >= 2 representation points and M - 1 thresholds")
        if not all(np.isfinite(th)) or not all(np.isfinite(rp)):
            raise ValueError("quantizer parameters must be finite")
        if any(b <= a for a, b in zip(rp, rp[1:])) or any(b <= a for a, b in zip(th, th[1:])):
            raise ValueError("thresholds and representation points must be strictly ascending")
        mids = [(a + b) / 2 for a, b in zip(rp, rp[1:])]
        if not np.allclose(th, mids, rtol=1e-12, atol=1e-12):
            raise ValueError("thresholds must be the midpoints of the representation points")

    @property
    def M(self) -> int:
        return len(self.rep_points)

    @classmethod
    def uniform(cls, M: int, theta: float) -> "Quantizer":
        """Symmetric uniform quantizer with spacing ``theta``.

        For M = 4 the thresholds are (-theta, 0, theta) and the representation
        points (-3theta/2, -theta/2, theta/2, 3theta/2).
        """
        if M < 2:
            raise ValueError("M must be >= 2")
        if not theta > 0:
            raise ValueError("theta must be positive")
        rp = [(i - (M - 1) / 2) * theta for i in range(M)]
        th = [(a + b) / 2 for a, b in zip(rp, rp[1:])]
        return cls(tuple(th), tuple(rp))


def quantize(q: Quantizer, x: float) -> int:
    x = float(x)
    if not np.isfinite(x):
        raise ValueError(f"cannot quantize non-finite value {x}")
    return int(K.quantize_level(np.asarray(q.thresholds), x))


def calibrate_theta(H: ParityCheckMatrix, channel, samples: int = 1000) -> float:
    """Median ``|soft syndrome|`` over the initial states of ``samples`` frames."""
    from .sim import sample_training_set

    vals = []
    g = H.graph
    for llr in sample_training_set(H, channel, samples, stream="calibration"):
        vals.append(np.bincount(g.edge_cn, weights=llr[g.cn_vn], minlength=H.m))
    return float(np.median(np.abs(np.concatenate(vals))))


def cluster_state_index(levels: Iterable[int], M: int) -> int:
    """Base-M positional code ``sum(levels[i] * M**i)``."""
    idx = 0
    for i, lvl in enumerate(levels):
        lvl = int(lvl)
        if not 0 <= lvl < M:
            raise ValueError(f"level {lvl} outside [0, {M})")
        idx += lvl * M**i
    return idx


def decode_state_index(index: int, M: int, z: int) -> list[int]:
    if not 0 <= index < M**z:
        raise ValueError(f"state index {index} outside [0, {M}**{z})")
    out = []
    for _ in range(z):
        index, lvl = divmod(index, M)
        out.append(lvl)
    return out


# ---------------------------------------------------------------------------
# Q-table


@dataclass(frozen=True)
class TrainConfig:
    alpha: float = 0.1
    beta: float = 0.9
    epsilon: float = 0.6
    ell_max: int = 25
    sample_count: int = 100_000
    seed: int = 0
    snr_db: float = 2.0
    batch_size: int = 2048

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")
        if not 0.0 <= self.beta < 1.0:
            raise ValueError("beta must lie in [0, 1)")
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError("epsilon must lie in [0, 1]")
        if self.ell_max < 0 or self.sample_count < 0 or self.batch_size < 1:
            raise ValueError("ell_max and sample_count must be >= 0, batch_size >= 1")


class QTable:
    """Per-cluster action values, stored flat.

    Cluster ``u`` owns a ``(M**z_u, z_u)`` block; blocks follow each other in
    cluster order, so the flat array is cluster-major, state-major,
    action-minor.  ``table(u)`` returns a writable view of one block.
    """

    def __init__(
        self,
        clustering: Clustering,
        quantizer: Quantizer,
        code_fingerprint: str,
        values: np.ndarray | None = None,
        config: TrainConfig | None = None,
    ):
        self.clustering = clustering
        self.quantizer = quantizer
        self.code_fingerprint = code_fingerprint
        self.config = config
        M = quantizer.M
        sizes = np.array(clustering.sizes, dtype=np.int64)
        block = np.array([M**int(z) * int(z) for z in sizes], dtype=np.int64)
        self._offsets = np.concatenate([[0], np.cumsum(block)[:-1]]).astype(np.int64)
        total = int(block.sum())
        if values is None:
            values = np.zeros(total)
        values = np.ascontiguousarray(values, dtype=np.float64)
        if values.shape != (total,):
            raise ValueError(f"expected {total} Q-values, got shape {values.shape}")
        self.values = values

        cl_cn = np.array([c for cl in clustering.clusters for c in cl], dtype=np.int64)
        m = clustering.m
        u_of = np.empty(m, dtype=np.int64)
        pos_of = np.empty(m, dtype=np.int64)
        for c, (u, pos) in clustering.membership.items():
            u_of[c], pos_of[c] = u, pos
        self.layout = K.ClusterLayout(
            self._offsets,
            sizes,
            np.concatenate([[0], np.cumsum(sizes)]).astype(np.int64),
            cl_cn,
            u_of,
            pos_of,
            np.array([M**i for i in range(int(sizes.max()))], dtype=np.int64),
            np.array(quantizer.thresholds, dtype=np.float64),
        )

    @classmethod
    def zeros(cls, H: ParityCheckMatrix, clustering: Clustering, quantizer: Quantizer, config=None) -> "QTable":
        if clustering.m != H.m:
            raise ValueError(f"clustering covers {clustering.m} CNs, code has {H.m}")
        return cls(clustering, quantizer, H.fingerprint(), config=config)

    @property
    def M(self) -> int:
        return self.quantizer.M

    @property
    def n_clusters(self) -> int:
        return len(self.clustering)

    def table(self, u: int) -> np.ndarray:
        z = self.clustering.sizes[u]
        lo = int(self._offsets[u])
        return self.values[lo : lo + self.M**z * z].reshape(self.M**z, z)

    def check_code(self, H: ParityCheckMatrix) -> None:
        if H.fingerprint() != self.code_fingerprint:
            raise FingerprintMismatch(
                f"Q-table was trained on a different parity-check matrix "
                f"(code fingerprint {self.code_fingerprint[:12]}, got {H.fingerprint()[:12]})"
            )
        if self.clustering.m != H.m:
            raise FingerprintMismatch("Q-table clustering does not cover this code's CNs")

    def fingerprint(self) -> str:
        h = hashlib.sha256(self.code_fingerprint.encode())
        h.update(self.clustering.fingerprint().encode())
        h.update(np.array(self.quantizer.thresholds + self.quantizer.rep_points, dtype="<f8").tobytes())
        h.update(self.values.astype("<f8").tobytes())
        return h.hexdigest()

    def __eq__(self, other) -> bool:
        if not isinstance(other, QTable):
            return NotImplemented
        return (
            self.clustering == other.clustering
            and self.quantizer == other.quantizer
            and self.code_fingerprint == other.code_fingerprint
            and self.config == other.config
            and np.array_equal(self.values, other.values)
        )


def _check_index(Q: QTable, u: int, s: int, a: int) -> None:
    if not 0 <= u < Q.n_clusters:
        raise IndexError(f"cluster {u} outside [0, {Q.n_clusters})")
    z = Q.clustering.sizes[u]
    if not 0 <= s < Q.M**z:
        raise IndexError(f"state {s} outside [0, {Q.M ** z}) for cluster {u}")
    if not 0 <= a < z:
        raise IndexError(f"action {a} outside [0, {z}) for cluster {u}")


def _states(Q: QTable, states) -> np.ndarray:
    st = np.asarray(states, dtype=np.int64)
    if st.shape != (Q.n_clusters,):
        raise ValueError(f"need one state per cluster ({Q.n_clusters}), got shape {st.shape}")
    for u, s in enumerate(st):
        if not 0 <= s < Q.M ** Q.clustering.sizes[u]:
            raise IndexError(f"state {s} out of range for cluster {u}")
    return st


def q_update(Q: QTable, u: int, s_u: int, a_u: int, r: float, next_states, alpha: float, beta: float) -> float:
    """One temporal-difference step, in place; returns the new value.

    Q(s_u, a_u) <- (1 - alpha) Q(s_u, a_u)
                   + alpha (r + beta * max over clusters u' and actions of Q(s'_u', .))

    where ``next_states[u']`` is cluster u's state after the action.
    """
    _check_index(Q, u, s_u, a_u)
    nxt = _states(Q, next_states)
    return float(K.q_update_flat(Q.values, Q.layout, u, s_u, a_u, float(r), nxt, float(alpha), float(beta)))


def epsilon_greedy(
    Q: QTable, states, epsilon: float, rng: np.random.Generator, stale=None, last_fired=None
) -> tuple[int, int]:
    """Pick ``(u, a_u)``.

    With probability ``epsilon`` a uniform cluster and a uniform action in it;
    otherwise the global argmax of ``Q(s_u, a)``, ignoring CNs flagged in
    ``stale``.  Ties go to the CN with the smallest ``last_fired`` entry (the
    step it last fired, -1 if never; all -1 by default), then to the lowest
    ``(u, a)``.  Always consumes three uniforms.
    """
    st = _states(Q, states)
    m = Q.clustering.m
    mask = np.zeros(m, dtype=np.bool_) if stale is None else np.asarray(stale, dtype=np.bool_)
    last = np.full(m, -1, dtype=np.int64) if last_fired is None else np.asarray(last_fired, dtype=np.int64)
    if mask.shape != (m,) or last.shape != (m,):
        raise ValueError(f"stale and last_fired must have length {m}")
    ps = K.Policy(np.zeros(m, dtype=np.int64), st, mask, last, np.zeros(m, dtype=np.int64))
    u0, u1, u2 = rng.random(3)
    u, a = K.epsilon_greedy_action(Q.values, Q.layout, ps, float(epsilon), u0, u1, u2)
    return int(u), int(a)


# ---------------------------------------------------------------------------
# training and decoding


class _Scratch:
    def __init__(self, H: ParityCheckMatrix, Q: QTable):
        self.work = K.new_work(H.m, H.n, H.num_edges)
        self.prov = np.zeros(H.num_edges)
        self.policy = K.new_policy(H.m, Q.n_clusters)


def _exploration_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, 0x51])))


def train(
    H: ParityCheckMatrix,
    clustering: Clustering,
    samples,
    config: TrainConfig = TrainConfig(),
    quantizer: Quantizer | None = None,
    M: int = 4,
) -> QTable:
    """Clustered Q-learning over a set of channel LLR vectors.

    ``samples`` is either an iterable of LLR vectors or a
    :class:`~ldpcsched.sim.ChannelConfig`, from which ``config.sample_count``
    all-zero-codeword frames are drawn.  Each frame runs ``config.ell_max``
    epsilon-greedy schedulings; the reward of a step is the largest residual
    of the fired CN, measured just before it fires.  Without an explicit
    ``quantizer`` a uniform M-level one is calibrated on 1000 frames.
    """
    from .sim import ChannelConfig, sample_training_set

    if clustering.m != H.m:
        raise ValueError(f"clustering covers {clustering.m} CNs, code has {H.m}")
    if isinstance(samples, ChannelConfig):
        channel = samples
        if quantizer is None:
            quantizer = Quantizer.uniform(M, calibrate_theta(H, channel))
        samples = sample_training_set(H, channel, config.sample_count)
    elif quantizer is None:
        samples = [np.asarray(s, dtype=np.float64) for s in samples]
        g = H.graph
        probe = [np.bincount(g.edge_cn, weights=s[g.cn_vn], minlength=H.m) for s in samples[:1000]]
        theta = float(np.median(np.abs(np.concatenate(probe)))) if probe else 1.0
        quantizer = Quantizer.uniform(M, theta if theta > 0 else 1.0)

    Q = QTable.zeros(H, clustering, quantizer, config=config)
    sc = _Scratch(H, Q)
    rng = _exploration_rng(config.seed)
    batch: list[np.ndarray] = []

    def flush():
        if not batch:
            return
        llrs = np.stack(batch)
        if llrs.shape[1] != H.n:
            raise ValueError(f"LLR vectors must have length {H.n}")
        draws = rng.random((len(batch), config.ell_max, 3))
        K.train_batch(
            H.graph, sc.work, Q.layout, Q.values, llrs, draws, config.ell_max,
            config.alpha, config.beta, config.epsilon,
            sc.prov, sc.policy,
        )
        batch.clear()

    for llr in samples:
        batch.append(np.asarray(llr, dtype=np.float64))
        if len(batch) == config.batch_size:
            flush()
    flush()
    return Q


def cluster_states(state: DecoderState, Q: QTable) -> np.ndarray:
    """Current state index of every cluster for a decoder state."""
    levels = np.zeros(state.H.m, dtype=np.int64)
    cstate = np.zeros(Q.n_clusters, dtype=np.int64)
    K.init_cluster_states(state.H.graph, state.work, Q.layout, levels, cstate)
    return cstate


def decode_mabns(
    H: ParityCheckMatrix, llr, Q: QTable, budget: int | None = None, per_cn_cap: int = 25
) -> DecodeResult:
    """Sequential decoding driven by a learned Q-table (greedy, no exploration).

    Each step fires the CN maximising ``Q(s_u, a_u)`` over all clusters,
    skipping CNs whose inputs have not changed since they last fired (firing
    them again would resend identical messages).  Equal values go to the CN
    fired least recently, so an all-zero table schedules round-robin.  No CN
    fires more than ``per_cn_cap`` times (0: unlimited).

    Stops at a zero syndrome, after ``budget`` schedulings (default
    ``25 * m``), or when no CN is eligible.  No residual is ever computed.
    """
    Q.check_code(H)
    if per_cn_cap < 0:
        raise ValueError("per_cn_cap must be >= 0")
    if budget is None:
        budget = 25 * H.m
    state = DecoderState(H, llr)
    sc = _Scratch(H, Q)
    K.mabns_frame(H.graph, state.work, Q.layout, Q.values, state.channel.copy(), int(budget), int(per_cn_cap), sc.policy)
    return _result(state)


# ---------------------------------------------------------------------------
# binary persistence

MAGIC = b"MABQ"
VERSION = 1


def save_qtable(Q: QTable) -> bytes:
    """Serialise a Q-table (little-endian throughout).

    Header: magic, u16 version, u32 m, u16 M, u32 cluster count, u32 z,
    32-byte code and clustering fingerprints, u32 size per cluster, u32 CN
    list in cluster order, f64 thresholds and representation points, the
    training config, u64 value count; then the f64 payload.
    """
    cl = Q.clustering
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<HIHII", VERSION, cl.m, Q.M, len(cl), cl.z))
    buf.write(bytes.fromhex(Q.code_fingerprint))
    buf.write(bytes.fromhex(cl.fingerprint()))
    buf.write(np.array(cl.sizes, dtype="<u4").tobytes())
    buf.write(np.array([c for c_ in cl.clusters for c in c_], dtype="<u4").tobytes())
    buf.write(np.array(Q.quantizer.thresholds + Q.quantizer.rep_points, dtype="<f8").tobytes())
    cfg = Q.config
    if cfg is None:
        buf.write(struct.pack("<B", 0))
    else:
        buf.write(struct.pack("<BdddQQqdQ", 1, cfg.alpha, cfg.beta, cfg.epsilon, cfg.ell_max,
                              cfg.sample_count, cfg.seed, cfg.snr_db, cfg.batch_size))
    buf.write(struct.pack("<Q", Q.values.size))
    buf.write(Q.values.astype("<f8").tobytes())
    return buf.getvalue()


class _Reader:
    def __init__(self, data: bytes):
        self.data = memoryview(data)
        self.pos = 0

    def take(self, nbytes: int, what: str) -> bytes:
        if self.pos + nbytes > len(self.data):
            raise QTableFormatError(f"truncated Q-table: {what} needs {nbytes} bytes at offset {self.pos}, "
                                    f"only {len(self.data) - self.pos} left")
        out = self.data[self.pos : self.pos + nbytes].tobytes()
        self.pos += nbytes
        return out

    def unpack(self, fmt: str, what: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt), what))


def load_qtable(data: bytes) -> QTable:
    r = _Reader(data)
    if r.take(4, "magic") != MAGIC:
        raise QTableFormatError("not a Q-table (bad magic)")
    version, m, M, n_clusters, z = r.unpack("<HIHII", "header")
    if version != VERSION:
        raise QTableFormatError(f"unsupported Q-table version {version}; this build reads version {VERSION}")
    code_fp = r.take(32, "code fingerprint").hex()
    cl_fp = r.take(32, "clustering fingerprint").hex()
    sizes = np.frombuffer(r.take(4 * n_clusters, "cluster sizes"), dtype="<u4").astype(int)
    cns = np.frombuffer(r.take(4 * m, "cluster members"), dtype="<u4").astype(int)
    if int(sizes.sum()) != m:
        raise QTableFormatError("cluster sizes do not add up to m")
    bounds = np.concatenate([[0], np.cumsum(sizes)])
    try:
        clustering = Clustering(tuple(tuple(cns[bounds[u] : bounds[u + 1]].tolist()) for u in range(n_clusters)), z)
    except ValueError as exc:
        raise QTableFormatError(f"corrupt clustering: {exc}") from None
    if clustering.fingerprint() != cl_fp:
        raise QTableFormatError("clustering fingerprint mismatch: header is corrupt")
    qv = np.frombuffer(r.take(8 * (2 * M - 1), "quantizer"), dtype="<f8")
    try:
        quantizer = Quantizer(tuple(qv[: M - 1]), tuple(qv[M - 1 :]))
    except ValueError as exc:
        raise QTableFormatError(f"corrupt quantizer: {exc}") from None
    (has_cfg,) = r.unpack("<B", "config flag")
    config = None
    if has_cfg:
        a, b, e, ell, cnt, seed, snr, bs = r.unpack("<dddQQqdQ", "training config")
        config = TrainConfig(a, b, e, ell, cnt, seed, snr, bs)
    (count,) = r.unpack("<Q", "value count")
    expected = int(sum(M**int(s) * int(s) for s in sizes))
    if count != expected:
        raise QTableFormatError(f"value count {count} does not match the layout ({expected})")
    values = np.frombuffer(r.take(8 * count, "Q-values"), dtype="<f8").astype(np.float64)
    if not np.isfinite(values).all():
        raise QTableFormatError("Q-values must be finite")
    if r.pos != len(r.data):
        raise QTableFormatError(f"{len(r.data) - r.pos} unexpected trailing bytes")
    return QTable(clustering, quantizer, code_fp, values, config)
