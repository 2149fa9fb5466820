"""Block-partitioned graphs with bit-packed subgraphs and degree caches.

Vertices are numbered ``0 .. n-1`` with blocks occupying contiguous ranges.
Each within-block subgraph ``(k, k)`` and each between-block subgraph
``(k, l)``, ``k < l``, owns a run of 64-bit words holding one bit per edge
label, plus a local degree array.  Labels are ordered lexicographically by
``(u, v)``, which fixes both the bit layout and the Glauber scan order.

The text format (1-based vertex ids)::

    blocks: 3 2
    1 2
    1 4
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property, lru_cache
from pathlib import Path
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .errors import GraphFormatError

WITHIN = 0
BETWEEN = 1


@dataclass(frozen=True)
class BlockPartition:
    """Sizes ``|A_1| .. |A_K|`` of contiguous vertex blocks."""

    block_sizes: tuple[int, ...]

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.block_sizes)
        if not sizes:
            raise ValueError("a partition needs at least one block")
        if any(s < 1 for s in sizes):
            raise ValueError(f"block sizes must be positive, got {sizes}")
        object.__setattr__(self, "block_sizes", sizes)

    @classmethod
    def uniform(cls, block_size: int, n_blocks: int) -> "BlockPartition":
        return cls((block_size,) * n_blocks)

    @property
    def K(self) -> int:
        return len(self.block_sizes)

    @property
    def M(self) -> int:
        return max(self.block_sizes)

    @property
    def n_vertices(self) -> int:
        return sum(self.block_sizes)

    @cached_property
    def offsets(self) -> np.ndarray:
        return np.concatenate([[0], np.cumsum(self.block_sizes)]).astype(np.int64)

    def block_of(self, vertex: int) -> int:
        if not 0 <= vertex < self.n_vertices:
            raise ValueError(f"vertex {vertex} outside 0..{self.n_vertices - 1}")
        return int(np.searchsorted(self.offsets, vertex, side="right") - 1)

    def pairs(self) -> list[tuple[int, int]]:
        """All subgraph pairs ``(k, l)``, ``k <= l``, in storage/scan order."""
        return [(k, l) for k in range(self.K) for l in range(k, self.K)]

    def within_pairs(self) -> list[tuple[int, int]]:
        return [(k, k) for k in range(self.K)]

    def between_pairs(self) -> list[tuple[int, int]]:
        return [(k, l) for k in range(self.K) for l in range(k + 1, self.K)]

    def check_pair(self, pair: tuple[int, int]) -> tuple[int, int]:
        k, l = int(pair[0]), int(pair[1])
        if not (0 <= k <= l < self.K):
            raise ValueError(f"invalid block pair {pair!r} for K={self.K}")
        return k, l

    def n_labels(self, pair: tuple[int, int]) -> int:
        k, l = self.check_pair(pair)
        a = self.block_sizes[k]
        if k == l:
            return a * (a - 1) // 2
        return a * self.block_sizes[l]

    def shape(self, pair: tuple[int, int]) -> "SubgraphShape":
        k, l = self.check_pair(pair)
        if k == l:
            return subgraph_shape(self.block_sizes[k], None)
        return subgraph_shape(self.block_sizes[k], self.block_sizes[l])

    @cached_property
    def layout(self) -> "Layout":
        return _layout(self.block_sizes)


class EdgeLabel(NamedTuple):
    """Edge ``(u, v)`` (global vertex ids) inside subgraph ``(k, l)``."""

    k: int
    l: int
    u: int
    v: int


@dataclass(frozen=True)
class SubgraphShape:
    """Label geometry of one subgraph, independent of where it sits.

    ``lu``/``lv`` give label endpoints as indices into the subgraph's local
    degree array: ``0..n-1`` for a within block, ``0..n_rows-1`` (rows) and
    ``n_rows..n_rows+n_cols-1`` (columns) for a bipartite block.
    """

    n_rows: int
    n_cols: int | None
    lu: np.ndarray
    lv: np.ndarray

    @property
    def bipartite(self) -> bool:
        return self.n_cols is not None

    @property
    def n_bits(self) -> int:
        return len(self.lu)

    @property
    def n_local(self) -> int:
        return self.n_rows + (self.n_cols or 0)

    @property
    def max_degree(self) -> int:
        if self.bipartite:
            return max(self.n_rows, self.n_cols)
        return self.n_rows - 1

    def label_index(self, lu: int, lv: int) -> int:
        if self.bipartite:
            return lu * self.n_cols + (lv - self.n_rows)
        n = self.n_rows
        return lu * n - lu * (lu + 1) // 2 + (lv - lu - 1)

    def incidence(self) -> np.ndarray:
        """``(n_bits, n_local)`` 0/1 matrix mapping labels to endpoints."""
        inc = np.zeros((self.n_bits, self.n_local), dtype=np.int64)
        idx = np.arange(self.n_bits)
        inc[idx, self.lu] = 1
        inc[idx, self.lv] = 1
        return inc


@lru_cache(maxsize=None)
def subgraph_shape(n_rows: int, n_cols: int | None) -> SubgraphShape:
    if n_cols is None:
        lu, lv = np.triu_indices(n_rows, k=1)
    else:
        lu, lv = np.divmod(np.arange(n_rows * n_cols), n_cols)
        lv = lv + n_rows
    lu = np.ascontiguousarray(lu, dtype=np.int64)
    lv = np.ascontiguousarray(lv, dtype=np.int64)
    lu.flags.writeable = False
    lv.flags.writeable = False
    return SubgraphShape(n_rows, n_cols, lu, lv)


@dataclass(frozen=True)
class Layout:
    """Flat storage plan for all subgraphs of a partition (kernel input)."""

    pairs: tuple[tuple[int, int], ...]
    family: np.ndarray  # WITHIN / BETWEEN per subgraph
    n_bits: np.ndarray
    word_off: np.ndarray
    deg_off: np.ndarray
    label_off: np.ndarray
    lu: np.ndarray  # concatenated local endpoints
    lv: np.ndarray
    n_words: int
    n_deg: int

    def index(self, pair: tuple[int, int]) -> int:
        return self._index[pair]

    @cached_property
    def _index(self) -> dict[tuple[int, int], int]:
        return {p: i for i, p in enumerate(self.pairs)}


@lru_cache(maxsize=64)
def _layout(block_sizes: tuple[int, ...]) -> Layout:
    part = BlockPartition(block_sizes)
    pairs = tuple(part.pairs())
    family, n_bits, word_off, deg_off, label_off = [], [], [], [], []
    lus, lvs = [], []
    w = d = lab = 0
    for k, l in pairs:
        shape = part.shape((k, l))
        family.append(WITHIN if k == l else BETWEEN)
        n_bits.append(shape.n_bits)
        word_off.append(w)
        deg_off.append(d)
        label_off.append(lab)
        lus.append(shape.lu)
        lvs.append(shape.lv)
        w += (shape.n_bits + 63) // 64
        d += shape.n_local
        lab += shape.n_bits
    as_i64 = lambda xs: np.asarray(xs, dtype=np.int64)  # noqa: E731
    return Layout(
        pairs=pairs,
        family=as_i64(family),
        n_bits=as_i64(n_bits),
        word_off=as_i64(word_off),
        deg_off=as_i64(deg_off),
        label_off=as_i64(label_off),
        lu=np.concatenate(lus).astype(np.int64) if lab else np.zeros(0, np.int64),
        lv=np.concatenate(lvs).astype(np.int64) if lab else np.zeros(0, np.int64),
        n_words=w,
        n_deg=d,
    )


def enumerate_edge_labels(partition: BlockPartition, pair: tuple[int, int]) -> list[EdgeLabel]:
    """Edge labels of subgraph ``pair`` in lexicographic ``(u, v)`` order."""
    k, l = partition.check_pair(pair)
    shape = partition.shape((k, l))
    off_k = int(partition.offsets[k])
    off_l = int(partition.offsets[l]) - (shape.n_rows if shape.bipartite else 0)
    if k == l:
        off_l = off_k
    return [
        EdgeLabel(k, l, off_k + int(a), off_l + int(b))
        for a, b in zip(shape.lu, shape.lv)
    ]


def _unpack(words: np.ndarray, n_bits: int) -> np.ndarray:
    raw = np.ascontiguousarray(words, dtype="<u8").view(np.uint8)
    return np.unpackbits(raw, bitorder="little")[:n_bits]


def _pack(bits: np.ndarray) -> np.ndarray:
    n_words = (len(bits) + 63) // 64
    padded = np.zeros(n_words * 64, dtype=np.uint8)
    padded[: len(bits)] = bits
    return np.packbits(padded, bitorder="little").view("<u8").astype(np.uint64)


class LergmGraph:
    """Undirected graph on a :class:`BlockPartition`.

    Mutating methods (:meth:`set_edge`, :meth:`set_subgraph_bits`) work in
    place; :func:`toggle_edge` and :meth:`copy` give value semantics.
    """

    def __init__(self, partition: BlockPartition, words=None, degrees=None):
        self.partition = partition
        lay = partition.layout
        if words is None:
            self.words = np.zeros(lay.n_words, dtype=np.uint64)
            self.deg = np.zeros(lay.n_deg, dtype=np.int64)
        else:
            self.words = np.asarray(words, dtype=np.uint64)
            if self.words.shape != (lay.n_words,):
                raise ValueError("word array does not match the partition layout")
            self.deg = np.asarray(degrees, dtype=np.int64) if degrees is not None else None
            if self.deg is None:
                self.deg = np.zeros(lay.n_deg, dtype=np.int64)
                self.rebuild_degrees()

    @classmethod
    def empty(cls, partition: BlockPartition) -> "LergmGraph":
        return cls(partition)

    @classmethod
    def from_edges(cls, partition: BlockPartition, edges: Iterable[tuple[int, int]]) -> "LergmGraph":
        g = cls(partition)
        seen = set()
        for u, v in edges:
            m = g.label(u, v)
            key = (m.u, m.v)
            if key in seen:
                raise GraphFormatError(f"duplicate edge {u} {v}")
            seen.add(key)
            g.set_edge(m, 1)
        return g

    def copy(self) -> "LergmGraph":
        return LergmGraph(self.partition, self.words.copy(), self.deg.copy())

    def __eq__(self, other):
        if not isinstance(other, LergmGraph):
            return NotImplemented
        return self.partition == other.partition and np.array_equal(self.words, other.words)

    def __repr__(self):
        return f"LergmGraph(blocks={list(self.partition.block_sizes)}, edges={self.n_edges()})"

    # -- addressing -----------------------------------------------------

    def label(self, u: int, v: int) -> EdgeLabel:
        """Canonical label for the vertex pair ``{u, v}``."""
        u, v = int(u), int(v)
        if u == v:
            raise GraphFormatError(f"self-loop at vertex {u}")
        if u > v:
            u, v = v, u
        return EdgeLabel(self.partition.block_of(u), self.partition.block_of(v), u, v)

    def _locate(self, m: EdgeLabel) -> tuple[int, int, int, int]:
        """(subgraph index, bit index, deg index of u, deg index of v)."""
        part = self.partition
        k, l = part.check_pair((m.k, m.l))
        off = part.offsets
        a, b = m.u - int(off[k]), m.v - int(off[l])
        if not (0 <= a < part.block_sizes[k] and 0 <= b < part.block_sizes[l]):
            raise ValueError(f"label {m} is not in E_{{{k},{l}}}")
        shape = part.shape((k, l))
        if k == l:
            if a >= b:
                raise ValueError(f"within-block label needs u < v, got {m}")
            lb = b
        else:
            lb = shape.n_rows + b
        lay = part.layout
        s = lay.index((k, l))
        bit = shape.label_index(a, lb)
        return s, bit, int(lay.deg_off[s]) + a, int(lay.deg_off[s]) + lb

    def bit(self, m: EdgeLabel) -> int:
        s, i, _, _ = self._locate(m)
        w = int(self.partition.layout.word_off[s]) + (i >> 6)
        return int((int(self.words[w]) >> (i & 63)) & 1)

    def has_edge(self, u: int, v: int) -> bool:
        return bool(self.bit(self.label(u, v)))

    def set_edge(self, m: EdgeLabel, value: int) -> None:
        s, i, du, dv = self._locate(m)
        w = int(self.partition.layout.word_off[s]) + (i >> 6)
        mask = np.uint64(1) << np.uint64(i & 63)
        old = bool(self.words[w] & mask)
        new = bool(value)
        if old == new:
            return
        if new:
            self.words[w] |= mask
            self.deg[du] += 1
            self.deg[dv] += 1
        else:
            self.words[w] &= ~mask
            self.deg[du] -= 1
            self.deg[dv] -= 1

    # -- subgraph views ----------------------------------------------------

    def _span(self, pair):
        lay = self.partition.layout
        s = lay.index(self.partition.check_pair(pair))
        return s, int(lay.word_off[s]), int(lay.deg_off[s]), int(lay.n_bits[s])

    def subgraph_bits(self, pair: tuple[int, int]) -> np.ndarray:
        """0/1 vector over the subgraph's labels in enumeration order."""
        _, w0, _, nb = self._span(pair)
        n_words = (nb + 63) // 64
        return _unpack(self.words[w0 : w0 + n_words], nb)

    def set_subgraph_bits(self, pair: tuple[int, int], bits) -> None:
        _, w0, d0, nb = self._span(pair)
        bits = np.asarray(bits, dtype=np.uint8)
        if bits.shape != (nb,):
            raise ValueError(f"expected {nb} bits for subgraph {pair}, got {bits.shape}")
        packed = _pack(bits)
        self.words[w0 : w0 + len(packed)] = packed
        shape = self.partition.shape(pair)
        self.deg[d0 : d0 + shape.n_local] = bits.astype(np.int64) @ shape.incidence()

    def degrees(self, pair: tuple[int, int]) -> np.ndarray:
        """Local degrees; a bipartite block lists row vertices then column vertices."""
        _, _, d0, _ = self._span(pair)
        n = self.partition.shape(pair).n_local
        return self.deg[d0 : d0 + n].copy()

    def edge_count(self, pair: tuple[int, int]) -> int:
        return int(self.subgraph_bits(pair).sum())

    def n_edges(self) -> int:
        return int(sum(bin(int(w)).count("1") for w in self.words))

    def is_degenerate(self, pair: tuple[int, int]) -> bool:
        """True when the subgraph is completely empty or completely full."""
        count = self.edge_count(pair)
        return count == 0 or count == self.partition.n_labels(pair)

    def degenerate_pairs(self, pairs: Sequence[tuple[int, int]] | None = None) -> list[tuple[int, int]]:
        pairs = self.partition.pairs() if pairs is None else pairs
        return [p for p in pairs if self.is_degenerate(p)]

    def rebuild_degrees(self) -> None:
        for pair in self.partition.pairs():
            _, _, d0, _ = self._span(pair)
            shape = self.partition.shape(pair)
            self.deg[d0 : d0 + shape.n_local] = self.subgraph_bits(pair).astype(np.int64) @ shape.incidence()

    def edges(self) -> list[tuple[int, int]]:
        """Present edges as global ``(u, v)``, ``u < v``, in storage order."""
        out = []
        for pair in self.partition.pairs():
            bits = self.subgraph_bits(pair)
            if not bits.any():
                continue
            labels = enumerate_edge_labels(self.partition, pair)
            out.extend((labels[i].u, labels[i].v) for i in np.flatnonzero(bits))
        return out

    # -- text format -----------------------------------------------------

    def to_text(self) -> str:
        lines = ["blocks: " + " ".join(str(s) for s in self.partition.block_sizes)]
        lines += [f"{u + 1} {v + 1}" for u, v in sorted(self.edges())]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "LergmGraph":
        rows = [ln.strip() for ln in text.splitlines()]
        rows = [ln for ln in rows if ln and not ln.startswith("#")]
        if not rows or not rows[0].startswith("blocks:"):
            raise GraphFormatError("graph file must start with 'blocks: n1 n2 ...'")
        try:
            sizes = tuple(int(t) for t in rows[0][len("blocks:") :].split())
            partition = BlockPartition(sizes)
        except ValueError as exc:
            raise GraphFormatError(f"bad blocks header: {rows[0]!r}") from exc
        edges = []
        for ln in rows[1:]:
            parts = ln.split()
            if len(parts) != 2:
                raise GraphFormatError(f"expected 'u v', got {ln!r}")
            try:
                u, v = int(parts[0]) - 1, int(parts[1]) - 1
            except ValueError as exc:
                raise GraphFormatError(f"non-integer vertex in {ln!r}") from exc
            if not (0 <= u < partition.n_vertices and 0 <= v < partition.n_vertices):
                raise GraphFormatError(f"vertex out of range in {ln!r}")
            edges.append((u, v))
        return cls.from_edges(partition, edges)

    def write(self, path) -> None:
        Path(path).write_text(self.to_text())

    @classmethod
    def read(cls, path) -> "LergmGraph":
        return cls.from_text(Path(path).read_text())


def toggle_edge(graph: LergmGraph, m: EdgeLabel, value: int) -> LergmGraph:
    """Copy of ``graph`` with label ``m`` set to ``value``."""
    out = graph.copy()
    out.set_edge(m, value)
    return out
