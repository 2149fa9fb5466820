"""Degree-based subgraph statistics and their change statistics.

Every built-in statistic is a function of the subgraph's degree sequence,

    s(x) = sum_i o(i) * H_i(x),

with ``o`` a finite weight table, so adding or removing an edge ``(u, v)``
only moves ``u`` and ``v`` one degree step.  The change statistic at ``m``
is therefore a sum of consecutive table differences evaluated at the
endpoint degrees in the graph with ``m`` removed.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .graph import BETWEEN, WITHIN, BlockPartition, EdgeLabel, LergmGraph

EDGES = "edges"
WEIGHTED_DEGREE = "weighted_degree"
BIPARTITE_WEIGHTED_DEGREE = "bipartite_weighted_degree"

FAMILIES = ("W", "B")


def _monotonicity(table: np.ndarray) -> str:
    diffs = np.diff(table)
    if diffs.size and np.all(diffs >= 0) and np.any(diffs > 0):
        return "increasing"
    if diffs.size and np.all(diffs <= 0) and np.any(diffs < 0):
        return "decreasing"
    return "none"


@dataclass(eq=False)
class StatisticSpec:
    """One coordinate of a subgraph statistic.

    ``side`` is only used by the bipartite kind: side 1 weights the degrees
    of the lower-indexed block ``k`` of a between-block pair ``(k, l)``,
    side 2 those of block ``l``.
    """

    kind: str
    table: np.ndarray | None = None
    side: int | None = None
    name: str = ""
    monotonicity: str | None = None

    def __post_init__(self):
        if self.kind not in (EDGES, WEIGHTED_DEGREE, BIPARTITE_WEIGHTED_DEGREE):
            raise ValueError(f"unknown statistic kind {self.kind!r}")
        if self.kind == EDGES:
            self.table = None
            declared, actual = self.monotonicity, "increasing"
        else:
            if self.table is None:
                raise ValueError(f"{self.kind} needs a weight table")
            self.table = np.asarray(self.table, dtype=np.float64).copy()
            if self.table.ndim != 1 or len(self.table) < 2:
                raise ValueError("weight table must be a 1-D array of length >= 2")
            if not np.all(np.isfinite(self.table)):
                raise ValueError("weight table must be finite")
            self.table.flags.writeable = False
            declared, actual = self.monotonicity, _monotonicity(self.table)
        if declared is not None and declared != actual:
            raise ValueError(f"declared monotonicity {declared!r} but table is {actual!r}")
        self.monotonicity = actual
        if self.kind == BIPARTITE_WEIGHTED_DEGREE:
            if self.side not in (1, 2):
                raise ValueError("bipartite statistic needs side 1 or 2")
        else:
            self.side = None
        if not self.name:
            self.name = self.kind if self.side is None else f"{self.kind}_{self.side}"

    @property
    def max_gap(self) -> float:
        if self.table is None:
            return 0.0
        return float(np.max(np.abs(np.diff(self.table))))

    def bound(self) -> float:
        """Upper bound on ``|Delta_m s|`` for this coordinate."""
        if self.kind == EDGES:
            return 1.0
        if self.kind == WEIGHTED_DEGREE:
            return 2.0 * self.max_gap
        return self.max_gap


# -- weight-table generators ------------------------------------------------


def geometric_weights(alpha: float, length: int) -> np.ndarray:
    """``o(i) = exp(-alpha * i)`` for ``i = 0 .. length-1``."""
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    return np.exp(-alpha * np.arange(length, dtype=np.float64))


def pochhammer_weights(a: int, b: int, length: int) -> np.ndarray:
    """``o(i) = 1 / (i + a)_b`` with the rising factorial ``(x)_b``."""
    if a < 1 or b < 1 or int(a) != a or int(b) != b:
        raise ValueError("a and b must be positive integers")
    i = np.arange(length, dtype=np.float64)
    rising = np.ones(length)
    for j in range(int(b)):
        rising *= i + a + j
    return 1.0 / rising


def edges() -> StatisticSpec:
    return StatisticSpec(EDGES, name="edges")


def gwd(alpha: float, length: int) -> StatisticSpec:
    return StatisticSpec(WEIGHTED_DEGREE, geometric_weights(alpha, length), name=f"gwd({alpha:g})")


def poch(a: int, b: int, length: int) -> StatisticSpec:
    return StatisticSpec(WEIGHTED_DEGREE, pochhammer_weights(a, b, length), name=f"poch({a},{b})")


def gwd_bipartite(side: int, alpha: float, length: int) -> StatisticSpec:
    return StatisticSpec(
        BIPARTITE_WEIGHTED_DEGREE, geometric_weights(alpha, length), side=side,
        name=f"gwd_bipartite({side},{alpha:g})",
    )


def poch_bipartite(side: int, a: int, b: int, length: int) -> StatisticSpec:
    return StatisticSpec(
        BIPARTITE_WEIGHTED_DEGREE, pochhammer_weights(a, b, length), side=side,
        name=f"poch_bipartite({side},{a},{b})",
    )


_CALL = re.compile(r"^\s*([a-z_]+)\s*(?:\((.*)\))?\s*$")


def parse_statistic(text: str, table_length: int) -> StatisticSpec:
    """Build a statistic from its config name, e.g. ``"gwd(1)"``."""
    match = _CALL.match(text)
    if not match:
        raise ValueError(f"cannot parse statistic {text!r}")
    name, args = match.group(1), match.group(2)
    vals = [float(t) for t in args.split(",")] if args and args.strip() else []

    def need(n):
        if len(vals) != n:
            raise ValueError(f"{name} takes {n} argument(s), got {text!r}")

    if name == "edges":
        need(0)
        return edges()
    if name == "gwd":
        if not vals:
            vals = [1.0]
        need(1)
        return gwd(vals[0], table_length)
    if name == "gwd_bipartite":
        if len(vals) == 1:
            vals.append(1.0)
        need(2)
        return gwd_bipartite(int(vals[0]), vals[1], table_length)
    if name == "poch":
        need(2)
        return poch(int(vals[0]), int(vals[1]), table_length)
    if name == "poch_bipartite":
        need(3)
        return poch_bipartite(int(vals[0]), int(vals[1]), int(vals[2]), table_length)
    raise ValueError(f"unknown statistic {name!r}")


# -- model --------------------------------------------------------------------


@dataclass(frozen=True)
class FamilyTables:
    """Change statistic as ``const + du[:, deg0(u)] + dv[:, deg0(v)]``.

    ``deg0`` is an endpoint's degree in the graph with the label removed.
    """

    const: np.ndarray  # (d,)
    du: np.ndarray  # (d, M)
    dv: np.ndarray  # (d, M)

    @property
    def d(self) -> int:
        return len(self.const)

    def weights(self, beta: np.ndarray) -> tuple[float, np.ndarray, np.ndarray]:
        """Collapse onto ``beta``: log-odds = c + wu[deg0(u)] + wv[deg0(v)]."""
        beta = np.asarray(beta, dtype=np.float64)
        if self.d == 0:
            width = self.du.shape[1]
            return 0.0, np.zeros(width), np.zeros(width)
        return float(beta @ self.const), beta @ self.du, beta @ self.dv


@dataclass
class ModelSpec:
    """Within-block statistics (``d1``) and between-block statistics (``d2``)."""

    partition: BlockPartition
    within_stats: list[StatisticSpec] = field(default_factory=list)
    between_stats: list[StatisticSpec] = field(default_factory=list)

    def __post_init__(self):
        self.within_stats = list(self.within_stats)
        self.between_stats = list(self.between_stats)
        M = self.partition.M
        for st in self.within_stats:
            if st.kind == BIPARTITE_WEIGHTED_DEGREE:
                raise ValueError(f"{st.name} only applies to between-block subgraphs")
            if st.table is not None and len(st.table) < M:
                raise ValueError(f"{st.name}: table length {len(st.table)} < max block size {M}")
        for st in self.between_stats:
            if st.table is not None and len(st.table) < M + 1:
                raise ValueError(
                    f"{st.name}: between-block degrees reach {M}, table needs length >= {M + 1}"
                )
        self._tables = {f: self._build_tables(f) for f in FAMILIES}

    @property
    def d1(self) -> int:
        return len(self.within_stats)

    @property
    def d2(self) -> int:
        return len(self.between_stats)

    def stats(self, family: str) -> list[StatisticSpec]:
        return self.within_stats if family == "W" else self.between_stats

    def dim(self, family: str) -> int:
        return len(self.stats(family))

    def tables(self, family: str) -> FamilyTables:
        return self._tables[family]

    def pairs(self, family: str) -> list[tuple[int, int]]:
        if family == "W":
            return self.partition.within_pairs()
        return self.partition.between_pairs()

    def param_names(self) -> list[str]:
        return [f"beta_W{j + 1}" for j in range(self.d1)] + [f"beta_B{j + 1}" for j in range(self.d2)]

    def _build_tables(self, family: str) -> FamilyTables:
        stats = self.stats(family)
        M = self.partition.M
        d = len(stats)
        const = np.zeros(d)
        du = np.zeros((d, M))
        dv = np.zeros((d, M))
        for j, st in enumerate(stats):
            if st.kind == EDGES:
                const[j] = 1.0
                continue
            gaps = np.diff(st.table)[:M]
            if st.kind == WEIGHTED_DEGREE or st.side == 1:
                du[j, : len(gaps)] = gaps
            if st.kind == WEIGHTED_DEGREE or st.side == 2:
                dv[j, : len(gaps)] = gaps
        for arr in (const, du, dv):
            arr.flags.writeable = False
        return FamilyTables(const, du, dv)


def family_of(pair: tuple[int, int]) -> str:
    return "W" if pair[0] == pair[1] else "B"


# -- evaluation -------------------------------------------------------------


def eval_from_degrees(stats: Sequence[StatisticSpec], deg: np.ndarray, n_rows: int, n_edges) -> np.ndarray:
    """Statistic values from local degree arrays.

    ``deg`` has shape ``(..., n_local)``; ``n_edges`` broadcasts against the
    leading dimensions.  Returns shape ``(..., d)``.
    """
    deg = np.asarray(deg)
    out = np.zeros(deg.shape[:-1] + (len(stats),))
    for j, st in enumerate(stats):
        if st.kind == EDGES:
            out[..., j] = n_edges
        elif st.kind == WEIGHTED_DEGREE:
            out[..., j] = st.table[deg].sum(axis=-1)
        elif st.side == 1:
            out[..., j] = st.table[deg[..., :n_rows]].sum(axis=-1)
        else:
            out[..., j] = st.table[deg[..., n_rows:]].sum(axis=-1)
    return out


def eval_statistic(spec: ModelSpec, graph: LergmGraph, pair: tuple[int, int]) -> np.ndarray:
    """``s_{k,l}(x_{k,l})`` for one subgraph."""
    pair = spec.partition.check_pair(pair)
    shape = spec.partition.shape(pair)
    return eval_from_degrees(
        spec.stats(family_of(pair)), graph.degrees(pair), shape.n_rows, graph.edge_count(pair)
    )


def _gather(tables: FamilyTables, deg0_u, deg0_v) -> np.ndarray:
    """Degree-dependent part of the change statistics, shape ``(..., d)``."""
    du = np.moveaxis(tables.du[:, deg0_u], 0, -1)
    dv = np.moveaxis(tables.dv[:, deg0_v], 0, -1)
    return du + dv


def change_matrix(spec: ModelSpec, graph: LergmGraph, pair: tuple[int, int]) -> tuple[np.ndarray, np.ndarray]:
    """All change statistics of one subgraph.

    Returns ``(delta, x)`` with ``delta[i] = Delta_m s(x)`` for the ``i``-th
    label and ``x`` the 0/1 label states.
    """
    pair = spec.partition.check_pair(pair)
    shape = spec.partition.shape(pair)
    tables = spec.tables(family_of(pair))
    x = graph.subgraph_bits(pair).astype(np.int64)
    deg = graph.degrees(pair)
    delta = tables.const + _gather(tables, deg[shape.lu] - x, deg[shape.lv] - x)
    return delta, x


def family_design(spec: ModelSpec, graph: LergmGraph, family: str) -> tuple[np.ndarray, np.ndarray]:
    """Stack :func:`change_matrix` over every subgraph of a family."""
    if graph.partition != spec.partition:
        raise ValueError("graph partition does not match the model")
    d = spec.dim(family)
    parts = [change_matrix(spec, graph, p) for p in spec.pairs(family)]
    if not parts:
        return np.zeros((0, d)), np.zeros(0, dtype=np.int64)
    return np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts])


def eval_bits(spec: ModelSpec, pair: tuple[int, int], bits: np.ndarray) -> np.ndarray:
    """Statistic values for a batch of subgraph states, ``(N, n_bits) -> (N, d)``."""
    shape = spec.partition.shape(pair)
    bits = np.asarray(bits, dtype=np.int64)
    deg = bits @ shape.incidence()
    return eval_from_degrees(spec.stats(family_of(pair)), deg, shape.n_rows, bits.sum(axis=-1))


def change_bits(spec: ModelSpec, pair: tuple[int, int], bits: np.ndarray) -> np.ndarray:
    """Change statistics for a batch of states, ``(N, n_bits) -> (N, n_bits, d)``."""
    shape = spec.partition.shape(pair)
    tables = spec.tables(family_of(pair))
    bits = np.asarray(bits, dtype=np.int64)
    deg = bits @ shape.incidence()
    return tables.const + _gather(tables, deg[:, shape.lu] - bits, deg[:, shape.lv] - bits)


def _check_label(spec: ModelSpec, pair, m: EdgeLabel) -> tuple[int, int]:
    pair = spec.partition.check_pair(pair)
    if (m.k, m.l) != pair:
        raise ValueError(f"label {m} does not belong to subgraph {pair}")
    return pair


def change_statistic(spec: ModelSpec, graph: LergmGraph, pair, m: EdgeLabel) -> np.ndarray:
    """``Delta_m s(x)``: statistic with ``m`` present minus with ``m`` absent, from the degree caches."""
    pair = _check_label(spec, pair, m)
    _, _, iu, iv = graph._locate(m)
    b = graph.bit(m)
    return spec.tables(family_of(pair)).const + _gather(
        spec.tables(family_of(pair)), graph.deg[iu] - b, graph.deg[iv] - b
    )


def removal_difference(spec: ModelSpec, graph: LergmGraph, pair, m: EdgeLabel) -> np.ndarray:
    """``s(x)`` minus the statistic with ``m`` removed; zero unless ``m`` is present."""
    pair = _check_label(spec, pair, m)
    if not graph.bit(m):
        return np.zeros(spec.dim(family_of(pair)))
    return change_statistic(spec, graph, pair, m)


def growth_constant(stats: Sequence[StatisticSpec]) -> float:
    """Certified bound on ``max ||Delta_m s||`` (Euclidean across coordinates)."""
    return math.sqrt(sum(st.bound() ** 2 for st in stats))


def growth_constants(spec: ModelSpec) -> dict[str, tuple[float, float]]:
    """``(L, C)`` per family; the bound is exact at fixed size so ``C = 0``."""
    return {f: (growth_constant(spec.stats(f)), 0.0) for f in FAMILIES}


__all__ = [
    "BETWEEN",
    "WITHIN",
    "EDGES",
    "WEIGHTED_DEGREE",
    "BIPARTITE_WEIGHTED_DEGREE",
    "FamilyTables",
    "ModelSpec",
    "StatisticSpec",
    "change_bits",
    "change_matrix",
    "change_statistic",
    "edges",
    "eval_bits",
    "eval_from_degrees",
    "eval_statistic",
    "family_design",
    "family_of",
    "geometric_weights",
    "growth_constant",
    "growth_constants",
    "gwd",
    "gwd_bipartite",
    "parse_statistic",
    "poch",
    "poch_bipartite",
    "pochhammer_weights",
    "removal_difference",
]
