"""Parity-check matrices, Tanner graphs and the code constructors.

Every edge of the Tanner graph has a stable integer id: edges are numbered
CN-major, i.e. edge ``e`` in ``range(cn_ptr[c], cn_ptr[c + 1])`` joins CN ``c``
to VN ``cn_vn[e]``.  Directed messages in the decoders are indexed by these
ids, one array per direction.
"""

from __future__ import annotations

import hashlib
from collections import deque
from typing import Iterable, NamedTuple, Sequence

import numpy as np


class CodeConstructionError(ValueError):
    """Raised when a requested code cannot be built."""


class AlistError(ValueError):
    """Malformed alist input.  ``line`` is the 1-based offending line."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class Graph(NamedTuple):
    """Flat CSR view of the Tanner graph, consumed by the numba kernels."""

    cn_ptr: np.ndarray  # (m + 1,) edge range per CN
    cn_vn: np.ndarray  # (E,) VN endpoint of each edge
    vn_ptr: np.ndarray  # (n + 1,) range into vn_edge per VN
    vn_edge: np.ndarray  # (E,) edge ids grouped by VN, ascending CN
    edge_cn: np.ndarray  # (E,) CN endpoint of each edge


class ParityCheckMatrix:
    """Immutable sparse binary parity-check matrix.

    Parameters
    ----------
    m, n : int
        Number of rows (CNs) and columns (VNs).
    rows : sequence of sequences of int
        ``rows[c]`` lists the VNs checked by CN ``c`` (0-based).  Order is
        irrelevant; duplicates are rejected.
    """

    __slots__ = ("m", "n", "rows", "cols", "graph", "_fingerprint")

    def __init__(self, m: int, n: int, rows: Sequence[Iterable[int]]):
        if m < 1 or n < 1:
            raise ValueError(f"matrix dimensions must be positive, got {m}x{n}")
        if len(rows) != m:
            raise ValueError(f"expected {m} rows, got {len(rows)}")
        clean_rows = []
        for c, row in enumerate(rows):
            r = sorted(int(v) for v in row)
            if len(set(r)) != len(r):
                raise ValueError(f"row {c} has duplicate entries")
            if r and (r[0] < 0 or r[-1] >= n):
                raise ValueError(f"row {c} has a column index outside [0, {n})")
            clean_rows.append(tuple(r))
        cols: list[list[int]] = [[] for _ in range(n)]
        for c, row in enumerate(clean_rows):
            for v in row:
                cols[v].append(c)

        self.m = m
        self.n = n
        self.rows: tuple[tuple[int, ...], ...] = tuple(clean_rows)
        self.cols: tuple[tuple[int, ...], ...] = tuple(tuple(cl) for cl in cols)
        self.graph = _build_graph(self.rows, self.cols)
        self._fingerprint: str | None = None

    def __setattr__(self, name, value):
        if hasattr(self, "_fingerprint") and name != "_fingerprint":
            raise AttributeError("ParityCheckMatrix is immutable")
        object.__setattr__(self, name, value)

    @classmethod
    def from_dense(cls, H: np.ndarray) -> "ParityCheckMatrix":
        H = np.asarray(H)
        if H.ndim != 2:
            raise ValueError("dense parity-check matrix must be 2-D")
        if not np.isin(H, (0, 1)).all():
            raise ValueError("dense parity-check matrix must be binary")
        m, n = H.shape
        return cls(m, n, [np.flatnonzero(H[c]).tolist() for c in range(m)])

    def to_dense(self) -> np.ndarray:
        H = np.zeros((self.m, self.n), dtype=np.uint8)
        H[self.graph.edge_cn, self.graph.cn_vn] = 1
        return H

    @property
    def num_edges(self) -> int:
        return len(self.graph.cn_vn)

    @property
    def row_weights(self) -> np.ndarray:
        return np.diff(self.graph.cn_ptr)

    @property
    def col_weights(self) -> np.ndarray:
        return np.diff(self.graph.vn_ptr)

    def regularity(self) -> tuple[int, int] | None:
        """Return ``(j, k)`` if every column has weight j and every row weight k."""
        cw, rw = self.col_weights, self.row_weights
        if (cw == cw[0]).all() and (rw == rw[0]).all():
            return int(cw[0]), int(rw[0])
        return None

    def fingerprint(self) -> str:
        """SHA-256 over the dimensions and adjacency; stable across processes."""
        if self._fingerprint is None:
            h = hashlib.sha256()
            h.update(np.array([self.m, self.n], dtype="<i8").tobytes())
            h.update(self.graph.cn_ptr.astype("<i8").tobytes())
            h.update(self.graph.cn_vn.astype("<i8").tobytes())
            self._fingerprint = h.hexdigest()
        return self._fingerprint

    def __eq__(self, other) -> bool:
        if not isinstance(other, ParityCheckMatrix):
            return NotImplemented
        return self.m == other.m and self.n == other.n and self.rows == other.rows

    def __hash__(self) -> int:
        return hash((self.m, self.n, self.rows))

    def __repr__(self) -> str:
        reg = self.regularity()
        tag = f", ({reg[0]},{reg[1]})-regular" if reg else ""
        return f"ParityCheckMatrix(m={self.m}, n={self.n}, edges={self.num_edges}{tag})"


def _build_graph(rows, cols) -> Graph:
    m, n = len(rows), len(cols)
    cn_ptr = np.zeros(m + 1, dtype=np.int64)
    cn_ptr[1:] = np.cumsum([len(r) for r in rows])
    cn_vn = np.fromiter((v for r in rows for v in r), dtype=np.int64, count=int(cn_ptr[-1]))
    edge_cn = np.repeat(np.arange(m, dtype=np.int64), np.diff(cn_ptr))
    # edges are CN-major, so a stable sort by VN keeps CNs ascending within a VN
    vn_edge = np.argsort(cn_vn, kind="stable").astype(np.int64)
    vn_ptr = np.zeros(n + 1, dtype=np.int64)
    vn_ptr[1:] = np.cumsum([len(c) for c in cols])
    g = Graph(cn_ptr, cn_vn, vn_ptr, vn_edge, edge_cn)
    for arr in g:
        arr.flags.writeable = False
    return g


class TannerGraph:
    """Bipartite-graph view over a :class:`ParityCheckMatrix`."""

    __slots__ = ("H",)

    def __init__(self, H: ParityCheckMatrix):
        self.H = H

    @property
    def num_cns(self) -> int:
        return self.H.m

    @property
    def num_vns(self) -> int:
        return self.H.n

    def cn_neighbors(self, c: int) -> tuple[int, ...]:
        return self.H.rows[c]

    def vn_neighbors(self, v: int) -> tuple[int, ...]:
        return self.H.cols[v]

    def cn_degrees(self) -> np.ndarray:
        return self.H.row_weights

    def vn_degrees(self) -> np.ndarray:
        return self.H.col_weights

    def edges(self) -> list[tuple[int, int]]:
        """All edges as ``(cn, vn)`` pairs in edge-id order."""
        g = self.H.graph
        return list(zip(g.edge_cn.tolist(), g.cn_vn.tolist()))

    def is_connected(self) -> bool:
        """True if every CN and VN lies in one connected component."""
        H = self.H
        seen_c = np.zeros(H.m, dtype=bool)
        seen_v = np.zeros(H.n, dtype=bool)
        seen_c[0] = True
        queue = deque([0])
        while queue:
            c = queue.popleft()
            for v in H.rows[c]:
                if not seen_v[v]:
                    seen_v[v] = True
                    for c2 in H.cols[v]:
                        if not seen_c[c2]:
                            seen_c[c2] = True
                            queue.append(c2)
        return bool(seen_c.all() and seen_v.all())


def as_matrix(G: TannerGraph | ParityCheckMatrix) -> ParityCheckMatrix:
    return G.H if isinstance(G, TannerGraph) else G


def _is_prime(p: int) -> bool:
    if p < 2:
        return False
    return all(p % d for d in range(2, int(p**0.5) + 1))


def build_ab_code(gamma: int, p: int) -> ParityCheckMatrix:
    """Array-based code H(gamma, p).

    Block ``(r, c)`` for ``r < gamma``, ``c < p`` is the p x p identity with its
    entries cyclically shifted left by ``r * c mod p`` positions, so row ``i``
    of that block has its single 1 in column ``(i - r*c) mod p``.
    """
    if not _is_prime(p):
        raise CodeConstructionError(f"p must be prime, got {p}")
    if not 1 <= gamma <= p:
        raise CodeConstructionError(f"gamma must satisfy 1 <= gamma <= p, got gamma={gamma}, p={p}")
    rows = []
    for r in range(gamma):
        for i in range(p):
            rows.append([c * p + (i - r * c) % p for c in range(p)])
    return ParityCheckMatrix(gamma * p, p * p, rows)


def build_regular_code(
    j: int,
    k: int,
    n: int,
    seed: int = 0,
    min_girth: int = 6,
    max_retries: int = 100,
) -> ParityCheckMatrix:
    """Random (j, k)-regular code by progressive edge growth.

    Each VN (visited in a random order) places its ``j`` edges one at a time
    onto the unsaturated CN farthest from it in the current graph, breaking
    ties by lowest current degree and then uniformly at random.  An edge
    that would close a cycle shorter than ``min_girth`` aborts the attempt;
    the whole construction restarts from scratch at most ``max_retries``
    times before :class:`CodeConstructionError` is raised.
    """
    if j < 1 or k < 1 or n < 1:
        raise CodeConstructionError("j, k and n must be positive")
    if (j * n) % k:
        raise CodeConstructionError(f"j*n = {j * n} is not divisible by k = {k}")
    if min_girth not in (4, 6, 8):
        raise CodeConstructionError(f"min_girth must be 4, 6 or 8, got {min_girth}")
    m = j * n // k
    if j > m or k > n:
        raise CodeConstructionError(f"degrees ({j},{k}) infeasible for m={m}, n={n}")

    rng = np.random.default_rng(seed)
    for _ in range(max_retries):
        rows = _peg_attempt(j, k, n, m, min_girth, rng)
        if rows is not None:
            return ParityCheckMatrix(m, n, rows)
    raise CodeConstructionError(
        f"could not reach girth {min_girth} for a ({j},{k})-regular code with n={n} "
        f"after {max_retries} attempts"
    )


def _peg_attempt(j, k, n, m, min_girth, rng) -> list[list[int]] | None:
    vn_adj: list[list[int]] = [[] for _ in range(n)]
    cn_adj: list[list[int]] = [[] for _ in range(m)]
    cn_deg = np.zeros(m, dtype=np.int64)

    for v in rng.permutation(n):
        v = int(v)
        for _ in range(j):
            dist = _cn_distances(v, vn_adj, cn_adj, m)
            open_cns = np.flatnonzero(cn_deg < k)
            cand = open_cns[dist[open_cns] != 1]  # 1 == already adjacent
            if cand.size == 0:
                return None
            far = dist[cand].max()
            cand = cand[dist[cand] == far]
            cand = cand[cn_deg[cand] == cn_deg[cand].min()]
            c = int(cand[rng.integers(cand.size)])
            # a CN at edge-distance d closes a cycle of length d + 1
            if far != np.iinfo(np.int64).max and far + 1 < min_girth:
                return None
            vn_adj[v].append(c)
            cn_adj[c].append(v)
            cn_deg[c] += 1
    return cn_adj


def _cn_distances(v, vn_adj, cn_adj, m) -> np.ndarray:
    """Edge distance from VN ``v`` to every CN; unreachable CNs get int64 max."""
    inf = np.iinfo(np.int64).max
    dist = np.full(m, inf, dtype=np.int64)
    seen_v = {v}
    frontier = [v]
    d = 1
    while frontier:
        nxt_c = []
        for u in frontier:
            for c in vn_adj[u]:
                if dist[c] == inf:
                    dist[c] = d
                    nxt_c.append(c)
        frontier = []
        for c in nxt_c:
            for u in cn_adj[c]:
                if u not in seen_v:
                    seen_v.add(u)
                    frontier.append(u)
        d += 2
    return dist


def lift_code(
    base: ParityCheckMatrix,
    lift: int,
    seed: int = 0,
    max_retries: int = 100,
) -> ParityCheckMatrix:
    """Quasi-cyclic lift of ``base``.

    Every 1-entry ``(c, v)`` becomes the ``lift x lift`` circulant permutation
    joining CN ``c*lift + i`` to VN ``v*lift + (i + s) % lift`` for a shift
    ``s`` drawn uniformly per entry; 0-entries become zero blocks.  When the
    base is free of 4-cycles, shift draws that create a lifted 4-cycle are
    rejected and redrawn.
    """
    if lift < 1:
        raise ValueError(f"lift must be >= 1, got {lift}")
    if lift == 1:
        return base
    from .analysis import enumerate_cycles

    base_free = not enumerate_cycles(base, 4)
    rng = np.random.default_rng(seed)
    for _ in range(max_retries):
        shifts = rng.integers(0, lift, size=base.num_edges)
        rows: list[list[int]] = []
        for c, row in enumerate(base.rows):
            start = int(base.graph.cn_ptr[c])
            for i in range(lift):
                rows.append([v * lift + (i + int(shifts[start + t])) % lift for t, v in enumerate(row)])
        lifted = ParityCheckMatrix(base.m * lift, base.n * lift, rows)
        if not base_free or not enumerate_cycles(lifted, 4):
            return lifted
    raise CodeConstructionError(f"no 4-cycle-free lift found after {max_retries} attempts")


def syndrome(H: ParityCheckMatrix, xhat) -> np.ndarray:
    """Binary syndrome ``H @ xhat mod 2`` as a uint8 vector of length m."""
    x = np.asarray(xhat)
    if x.shape != (H.n,):
        raise ValueError(f"xhat must have length {H.n}, got shape {x.shape}")
    g = H.graph
    counts = np.bincount(g.edge_cn, weights=(x[g.cn_vn] & 1), minlength=H.m)
    return (counts.astype(np.int64) & 1).astype(np.uint8)


# ---------------------------------------------------------------------------
# alist I/O


def write_alist(H: ParityCheckMatrix) -> str:
    """Serialise in MacKay's alist layout (1-based, zero-padded lists)."""
    cw, rw = H.col_weights, H.row_weights
    max_c, max_r = int(cw.max(initial=0)), int(rw.max(initial=0))
    lines = [
        f"{H.n} {H.m}",
        f"{max_c} {max_r}",
        " ".join(map(str, cw.tolist())),
        " ".join(map(str, rw.tolist())),
    ]
    for col in H.cols:
        entries = [c + 1 for c in col] + [0] * (max_c - len(col))
        lines.append(" ".join(map(str, entries or [0])))
    for row in H.rows:
        entries = [v + 1 for v in row] + [0] * (max_r - len(row))
        lines.append(" ".join(map(str, entries or [0])))
    return "\n".join(lines) + "\n"


def parse_alist(text: str | bytes) -> ParityCheckMatrix:
    """Parse MacKay alist text; every inconsistency raises :class:`AlistError`."""
    if isinstance(text, bytes):
        text = text.decode("ascii", errors="replace")
    lines = [(i + 1, ln.split()) for i, ln in enumerate(text.splitlines()) if ln.strip()]
    if not lines:
        raise AlistError("empty alist input", 1)
    it = iter(lines)

    def take(expected: int | None, what: str):
        try:
            lineno, toks = next(it)
        except StopIteration:
            raise AlistError(f"unexpected end of input while reading {what}") from None
        try:
            vals = [int(t) for t in toks]
        except ValueError:
            raise AlistError(f"non-integer token in {what}", lineno) from None
        if expected is not None and len(vals) != expected:
            raise AlistError(f"{what}: expected {expected} values, got {len(vals)}", lineno)
        return lineno, vals

    lineno, (n, m) = take(2, "dimensions")
    if n < 1 or m < 1:
        raise AlistError(f"non-positive dimensions {n} {m}", lineno)
    lineno, (max_c, max_r) = take(2, "maximum degrees")
    lineno, col_deg = take(n, "column degrees")
    if any(d < 0 or d > max_c for d in col_deg):
        raise AlistError("column degree outside [0, max column degree]", lineno)
    lineno, row_deg = take(m, "row degrees")
    if any(d < 0 or d > max_r for d in row_deg):
        raise AlistError("row degree outside [0, max row degree]", lineno)

    cols = []
    for v in range(n):
        lineno, vals = take(None, f"adjacency of column {v + 1}")
        nz = [x for x in vals if x != 0]
        if len(nz) != col_deg[v]:
            raise AlistError(f"column {v + 1} lists {len(nz)} rows, degree says {col_deg[v]}", lineno)
        for x in nz:
            if not 1 <= x <= m:
                raise AlistError(f"column {v + 1} references row {x} outside [1, {m}]", lineno)
        cols.append((lineno, sorted(x - 1 for x in nz)))
    rows = []
    for c in range(m):
        lineno, vals = take(None, f"adjacency of row {c + 1}")
        nz = [x for x in vals if x != 0]
        if len(nz) != row_deg[c]:
            raise AlistError(f"row {c + 1} lists {len(nz)} columns, degree says {row_deg[c]}", lineno)
        for x in nz:
            if not 1 <= x <= n:
                raise AlistError(f"row {c + 1} references column {x} outside [1, {n}]", lineno)
        if len(set(nz)) != len(nz):
            raise AlistError(f"row {c + 1} has duplicate entries", lineno)
        rows.append(sorted(x - 1 for x in nz))
    extra = next(it, None)
    if extra is not None:
        raise AlistError("trailing data after row lists", extra[0])

    H = ParityCheckMatrix(m, n, rows)
    for v, (lineno, col) in enumerate(cols):
        if tuple(col) != H.cols[v]:
            raise AlistError(f"column {v + 1} disagrees with the row lists", lineno)
    return H


def load_alist(path) -> ParityCheckMatrix:
    with open(path, "rb") as f:
        return parse_alist(f.read())


def save_alist(H: ParityCheckMatrix, path) -> None:
    with open(path, "w", encoding="ascii", newline="\n") as f:
        f.write(write_alist(H))
