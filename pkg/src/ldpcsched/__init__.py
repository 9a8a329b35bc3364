"""LDPC belief-propagation decoding with flooding, residual and Q-learned
check-node scheduling, plus Tanner-graph cycle and cluster analysis."""

from __future__ import annotations

__version__ = "0.1.0"

from .analysis import ccs, ccs_bounds_ab, ccs_bounds_regular, count_cycles, enumerate_cycles, girth, zeta
from .bp import DecodeResult, DecoderState, cn_update, decode_flooding, decode_ns, residual, schedule_cn, vn_update
from .clustering import (
    Clustering,
    cluster_contiguous,
    cluster_cycle_optimized,
    cluster_exhaustive,
    cluster_random,
)
from .rl import QTable, Quantizer, TrainConfig, decode_mabns, load_qtable, save_qtable, train
from .sim import BenchBudget, BenchResult, ChannelConfig, run_bench, transmit
from .tanner import ParityCheckMatrix, TannerGraph, build_ab_code, build_regular_code, lift_code, load_alist, parse_alist, write_alist

__all__ = [name for name in dir() if not name.startswith("_") and name != "annotations"]
