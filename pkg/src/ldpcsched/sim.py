"""BPSK/AWGN channel, training-set sampling and Monte Carlo benchmarking.

The all-zero codeword is transmitted throughout; bit 0 maps to +1.  Every
frame draws its noise from its own Philox stream, keyed by the run seed and
a stream tag, with the trial and SNR indices in the counter.  Frame ``t`` at
SNR index ``i`` is therefore the same whatever the chunking or thread
count, and every decoder in a benchmark sees identical noise.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Iterator, Mapping

import numpy as np

from . import _kernels as K
from .tanner import ParityCheckMatrix

CSV_COLUMNS = ("snr_db", "decoder", "trials", "bit_errors", "ber", "avg_cn2vn", "avg_vn2c", "avg_schedulings")
Z95 = 1.959963984540054


def design_rate(H: ParityCheckMatrix) -> float:
    """``1 - m/n``, counting every row of H as a constraint."""
    return 1.0 - H.m / H.n


@dataclass(frozen=True)
class ChannelConfig:
    """AWGN channel at ``snr_db`` (Eb/N0) for a code of rate ``rate``."""

    snr_db: float
    rate: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if not math.isfinite(self.snr_db):
            raise ValueError("snr_db must be finite")
        if not 0.0 < self.rate <= 1.0:
            raise ValueError("rate must lie in (0, 1]")

    @classmethod
    def for_code(cls, H: ParityCheckMatrix, snr_db: float, seed: int = 0) -> "ChannelConfig":
        return cls(snr_db, design_rate(H), seed)

    @property
    def sigma2(self) -> float:
        return 1.0 / (2.0 * self.rate * 10.0 ** (self.snr_db / 10.0))


def _stream_key(seed: int, stream: str) -> np.ndarray:
    tag = zlib.crc32(stream.encode())
    return np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, tag]).generate_state(2, dtype=np.uint64)


def frame_rng(seed: int, stream: str, trial: int, snr_index: int = 0) -> np.random.Generator:
    """Generator for one frame: Philox keyed by (seed, stream), counter (0, 0, trial, snr_index)."""
    bitgen = np.random.Philox(key=_stream_key(seed, stream), counter=np.array([0, 0, trial, snr_index], dtype=np.uint64))
    return np.random.Generator(bitgen)


def transmit(x, channel: ChannelConfig, rng: np.random.Generator | None = None) -> tuple[np.ndarray, np.ndarray]:
    """BPSK-modulate ``x`` and add white Gaussian noise.

    Returns the received samples ``y`` and the channel LLRs ``2y/sigma^2``.
    """
    x = np.asarray(x)
    if rng is None:
        rng = np.random.default_rng(channel.seed)
    sigma2 = channel.sigma2
    y = 1.0 - 2.0 * x.astype(np.float64) + math.sqrt(sigma2) * rng.standard_normal(x.shape)
    return y, 2.0 * y / sigma2


def llr_block(
    n: int,
    channel: ChannelConfig,
    start: int,
    count: int,
    stream: str = "bench",
    snr_index: int = 0,
    noiseless: bool = False,
) -> np.ndarray:
    """Channel LLRs of frames ``start .. start+count-1`` (all-zero codeword)."""
    sigma2 = channel.sigma2
    out = np.empty((count, n))
    if noiseless:
        out.fill(2.0 / sigma2)
        return out
    sd = math.sqrt(sigma2)
    for i in range(count):
        noise = frame_rng(channel.seed, stream, start + i, snr_index).standard_normal(n)
        out[i] = (2.0 / sigma2) * (1.0 + sd * noise)
    return out


def sample_training_set(
    H: ParityCheckMatrix, channel: ChannelConfig, count: int, stream: str = "train"
) -> Iterator[np.ndarray]:
    """Stream ``count`` training LLR vectors without holding them all in memory."""
    if count < 0:
        raise ValueError("count must be >= 0")
    chunk = 1024
    for start in range(0, count, chunk):
        yield from llr_block(H.n, channel, start, min(chunk, count - start), stream=stream)


# ---------------------------------------------------------------------------
# benchmarking


@dataclass(frozen=True)
class BenchBudget:
    """Decoding budgets.

    ``sequential`` defaults to ``ell_max * m`` schedulings and ``flooding``
    to ``ell_max`` iterations.  ``per_cn_cap`` bounds how often the learned
    scheduler may fire any one CN (default ``ell_max``; 0 disables it).
    """

    ell_max: int = 25
    sequential: int | None = None
    flooding: int | None = None
    per_cn_cap: int | None = None

    def __post_init__(self):
        for name in ("ell_max", "sequential", "flooding", "per_cn_cap"):
            val = getattr(self, name)
            if val is not None and val < 0:
                raise ValueError(f"{name} must be >= 0")

    def schedulings(self, m: int) -> int:
        return self.ell_max * m if self.sequential is None else self.sequential

    def iterations(self) -> int:
        return self.ell_max if self.flooding is None else self.flooding

    def cap(self) -> int:
        return self.ell_max if self.per_cn_cap is None else self.per_cn_cap


@dataclass
class BenchRow:
    """Integer totals for one (SNR, decoder) cell; means and CIs derive from them."""

    snr_db: float
    decoder: str
    n: int
    trials: int = 0
    bit_errors: int = 0
    bit_errors_sq: int = 0
    frame_errors: int = 0
    cn2vn: int = 0
    cn2vn_sq: int = 0
    vn2c: int = 0
    vn2c_sq: int = 0
    schedulings: int = 0
    schedulings_sq: int = 0
    residual_evals: int = 0

    def add(self, out: np.ndarray) -> None:
        o = out.astype(object)  # Python ints: exact, overflow-free sums
        self.trials += out.shape[0]
        self.bit_errors += int(o[:, 0].sum())
        self.bit_errors_sq += int((o[:, 0] ** 2).sum())
        self.frame_errors += int((out[:, 0] > 0).sum())
        self.cn2vn += int(o[:, 1].sum())
        self.cn2vn_sq += int((o[:, 1] ** 2).sum())
        self.vn2c += int(o[:, 2].sum())
        self.vn2c_sq += int((o[:, 2] ** 2).sum())
        self.schedulings += int(o[:, 3].sum())
        self.schedulings_sq += int((o[:, 3] ** 2).sum())
        self.residual_evals += int(o[:, 5].sum())

    def _mean(self, total: int) -> float:
        return total / self.trials if self.trials else float("nan")

    def _ci(self, total: int, total_sq: int, scale: float = 1.0) -> tuple[float, float]:
        N = self.trials
        if N < 2:
            return (float("nan"), float("nan"))
        mean = total / N
        var = max(total_sq / N - mean * mean, 0.0) * N / (N - 1)
        half = Z95 * math.sqrt(var / N)
        return ((mean - half) / scale, (mean + half) / scale)

    @property
    def ber(self) -> float:
        return self.bit_errors / (self.trials * self.n) if self.trials else float("nan")

    @property
    def fer(self) -> float:
        return self._mean(self.frame_errors)

    @property
    def avg_cn2vn(self) -> float:
        return self._mean(self.cn2vn)

    @property
    def avg_vn2c(self) -> float:
        return self._mean(self.vn2c)

    @property
    def avg_schedulings(self) -> float:
        return self._mean(self.schedulings)

    def ber_ci(self) -> tuple[float, float]:
        """95% normal-approximation interval from per-frame bit-error counts."""
        return self._ci(self.bit_errors, self.bit_errors_sq, scale=self.n)

    def cn2vn_ci(self) -> tuple[float, float]:
        return self._ci(self.cn2vn, self.cn2vn_sq)

    def csv_record(self) -> dict:
        return {
            "snr_db": self.snr_db,
            "decoder": self.decoder,
            "trials": self.trials,
            "bit_errors": self.bit_errors,
            "ber": self.ber,
            "avg_cn2vn": self.avg_cn2vn,
            "avg_vn2c": self.avg_vn2c,
            "avg_schedulings": self.avg_schedulings,
        }


@dataclass
class BenchResult:
    rows: list[BenchRow]
    metadata: dict = field(default_factory=dict)

    def row(self, snr_db: float, decoder: str) -> BenchRow:
        for r in self.rows:
            if r.decoder == decoder and math.isclose(r.snr_db, snr_db):
                return r
        raise KeyError((snr_db, decoder))

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for r in self.rows:
            writer.writerow(r.csv_record())
        return buf.getvalue()

    def summary(self) -> list[dict]:
        out = []
        for r in self.rows:
            rec = r.csv_record()
            rec.update(
                frame_errors=r.frame_errors,
                fer=r.fer,
                ber_ci95=list(r.ber_ci()),
                avg_cn2vn_ci95=list(r.cn2vn_ci()),
                avg_residual_evals=r._mean(r.residual_evals),
            )
            out.append(rec)
        return out

    def to_json(self) -> str:
        return json.dumps({"metadata": self.metadata, "results": self.summary()}, indent=2)


def _decoder_kind(entry) -> str:
    from .rl import QTable

    if isinstance(entry, QTable):
        return "mabns"
    if entry in ("flooding", "ns"):
        return entry
    raise ValueError(f"decoder must be 'flooding', 'ns' or a QTable, got {entry!r}")


def run_bench(
    H: ParityCheckMatrix,
    decoders: Mapping[str, object],
    snrs_db,
    trials: int,
    seed: int = 0,
    budget: BenchBudget = BenchBudget(),
    workers: int | None = None,
    chunk: int = 500,
    noiseless: bool = False,
    rate: float | None = None,
) -> BenchResult:
    """Monte Carlo comparison of decoders on shared noise.

    ``decoders`` maps a label to ``"flooding"``, ``"ns"`` or a trained
    :class:`~ldpcsched.rl.QTable`.  Work is split into ``chunk``-frame pieces
    run on a thread pool; results are accumulated as exact integer totals,
    so they do not depend on ``workers`` or ``chunk``.
    """
    if trials < 0:
        raise ValueError("trials must be >= 0")
    if chunk < 1:
        raise ValueError("chunk must be >= 1")
    kinds = {label: _decoder_kind(entry) for label, entry in decoders.items()}
    for label, entry in decoders.items():
        if kinds[label] == "mabns":
            entry.check_code(H)
    rate = design_rate(H) if rate is None else rate
    snrs = [float(s) for s in snrs_db]
    channels = [ChannelConfig(s, rate, seed) for s in snrs]
    sched_budget = budget.schedulings(H.m)
    flood_iters = budget.iterations()
    g = H.graph

    def task(i: int, start: int):
        count = min(chunk, trials - start)
        llrs = llr_block(H.n, channels[i], start, count, snr_index=i, noiseless=noiseless)
        w = K.new_work(H.m, H.n, H.num_edges)
        results = {}
        for label, entry in decoders.items():
            out = np.zeros((count, len(K.OUT_COLS)), dtype=np.int64)
            kind = kinds[label]
            if kind == "flooding":
                K.flooding_batch(g, w, llrs, flood_iters, out)
            elif kind == "ns":
                K.ns_batch(g, w, llrs, sched_budget, np.zeros(H.num_edges), np.zeros(H.m), np.zeros(H.m, dtype=np.bool_), out)
            else:
                ps = K.new_policy(H.m, entry.n_clusters)
                K.mabns_batch(g, w, entry.layout, entry.values, llrs, sched_budget, budget.cap(), ps, out)
            results[label] = out
        return i, results

    rows = {(i, label): BenchRow(snrs[i], label, H.n) for i in range(len(snrs)) for label in decoders}
    jobs = [(i, start) for i in range(len(snrs)) for start in range(0, trials, chunk)]
    workers = workers or os.cpu_count() or 1
    with ThreadPoolExecutor(max_workers=workers) as pool:
        for i, results in pool.map(lambda job: task(*job), jobs):
            for label, out in results.items():
                rows[(i, label)].add(out)

    from . import __version__

    metadata = {
        "package_version": __version__,
        "seed": seed,
        "trials": trials,
        "snrs_db": snrs,
        "rate": rate,
        "rate_convention": "1 - m/n",
        "noiseless": noiseless,
        "budget": {
            **asdict(budget),
            "sequential_schedulings": sched_budget,
            "flooding_iterations": flood_iters,
            "learned_per_cn_cap": budget.cap(),
        },
        "code": {"m": H.m, "n": H.n, "fingerprint": H.fingerprint()},
        "decoders": {
            label: ({"kind": "mabns", "qtable_fingerprint": entry.fingerprint()} if kinds[label] == "mabns" else {"kind": kinds[label]})
            for label, entry in decoders.items()
        },
    }
    ordered = [rows[(i, label)] for i in range(len(snrs)) for label in decoders]
    return BenchResult(ordered, metadata)
