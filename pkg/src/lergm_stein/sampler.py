"""Glauber-dynamics sampling and exact enumeration of single subgraphs.

The systematic scan visits every subgraph in storage order and every edge
label in lexicographic order, setting the label to 1 with its conditional
probability given the current state.  Uniforms come from a counter-based
Philox stream, so a chain is a deterministic function of ``(seed, replicate)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.special import logsumexp

from ._kernels import glauber_sweeps
from .errors import CapacityError, SamplingError
from .graph import BlockPartition, LergmGraph
from .params import ParameterVector
from .statistics import FAMILIES, ModelSpec, eval_bits, family_of

ENUMERATION_CAP = 25
_UNIFORM_BATCH = 1 << 22
_ENUM_CHUNK = 1 << 18
_SEED_MASK = (1 << 64) - 1


@dataclass(frozen=True)
class SamplerConfig:
    burn_in: int = 1000
    thinning: int = 1
    seed: int = 0
    reject_degenerate: bool = False
    max_retries: int = 1000

    def __post_init__(self):
        if self.burn_in < 0:
            raise ValueError("burn_in must be >= 0")
        if self.thinning < 1:
            raise ValueError("thinning must be >= 1")
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")


def make_rng(seed: int, replicate: int = 0) -> np.random.Generator:
    """Philox stream keyed by ``seed XOR replicate``."""
    return np.random.Generator(np.random.Philox(key=(int(seed) ^ int(replicate)) & _SEED_MASK))


def _active_mask(partition: BlockPartition, families: Iterable[str]) -> np.ndarray:
    fams = set(families)
    bad = fams - set(FAMILIES)
    if bad:
        raise ValueError(f"unknown families {sorted(bad)}")
    lay = partition.layout
    return np.array([family_of(p) in fams for p in lay.pairs], dtype=np.bool_)


def _collapsed_weights(spec: ModelSpec, beta: ParameterVector):
    beta.check_dims(spec.d1, spec.d2)
    M = spec.partition.M
    const = np.zeros(2)
    wu = np.zeros((2, M))
    wv = np.zeros((2, M))
    for i, fam in enumerate(FAMILIES):
        const[i], wu[i], wv[i] = spec.tables(fam).weights(beta.of(fam))
    return const, wu, wv


def _run_sweeps(graph: LergmGraph, spec: ModelSpec, beta: ParameterVector, rng, n_sweeps: int, active) -> None:
    if n_sweeps <= 0:
        return
    lay = graph.partition.layout
    per_sweep = int(lay.n_bits[active].sum())
    if per_sweep == 0:
        return
    const, wu, wv = _collapsed_weights(spec, beta)
    per_batch = max(1, _UNIFORM_BATCH // per_sweep)
    done = 0
    while done < n_sweeps:
        k = min(per_batch, n_sweeps - done)
        u = rng.random(k * per_sweep)
        glauber_sweeps(
            graph.words, graph.deg, active, lay.family, lay.n_bits, lay.word_off,
            lay.deg_off, lay.label_off, lay.lu, lay.lv, const, wu, wv, u, k,
        )
        done += k


def glauber_sweep(
    graph: LergmGraph,
    spec: ModelSpec,
    beta: ParameterVector,
    rng: np.random.Generator,
    families: Sequence[str] = FAMILIES,
) -> LergmGraph:
    """One systematic scan; returns the updated copy of ``graph``."""
    out = graph.copy()
    _run_sweeps(out, spec, beta, rng, 1, _active_mask(graph.partition, families))
    return out


def reference_sweep(
    graph: LergmGraph, spec: ModelSpec, beta: ParameterVector, uniforms: np.ndarray
) -> LergmGraph:
    """Pure-Python sweep over all subgraphs driven by explicit uniforms.

    Slow; kept as the oracle for the compiled kernel.
    """
    from .graph import enumerate_edge_labels
    from .statistics import change_statistic

    out = graph.copy()
    pos = 0
    for pair in out.partition.pairs():
        b = beta.of(family_of(pair))
        for m in enumerate_edge_labels(out.partition, pair):
            t = float(np.dot(b, change_statistic(spec, out, pair, m)))
            out.set_edge(m, 1 if uniforms[pos] < _sigmoid(t) else 0)
            pos += 1
    return out


def _sigmoid(t: float) -> float:
    if t >= 0.0:
        return 1.0 / (1.0 + math.exp(-t))
    e = math.exp(t)
    return e / (1.0 + e)


def sample_lergm(
    spec: ModelSpec,
    beta: ParameterVector,
    config: SamplerConfig,
    n_samples: int = 1,
    *,
    replicate: int = 0,
    families: Sequence[str] = FAMILIES,
    initial: LergmGraph | None = None,
    rng: np.random.Generator | None = None,
) -> list[LergmGraph]:
    """Draw ``n_samples`` graphs from one chain after ``burn_in`` sweeps.

    Subgraphs outside ``families`` keep their initial state (empty by
    default); use this to skip a family with no statistics.  With
    ``reject_degenerate``, a draw with a full or empty subgraph in an
    active family is discarded and the chain advanced by ``thinning``
    sweeps, at most ``max_retries`` times per draw.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    partition = spec.partition
    graph = LergmGraph.empty(partition) if initial is None else initial.copy()
    if graph.partition != partition:
        raise ValueError("initial graph partition does not match the model")
    rng = make_rng(config.seed, replicate) if rng is None else rng
    active = _active_mask(partition, families)
    active_pairs = [p for p, a in zip(partition.layout.pairs, active) if a]

    _run_sweeps(graph, spec, beta, rng, config.burn_in, active)
    out = []
    for i in range(n_samples):
        if i > 0:
            _run_sweeps(graph, spec, beta, rng, config.thinning, active)
        if config.reject_degenerate:
            retries = 0
            while bad := graph.degenerate_pairs(active_pairs):
                if retries >= config.max_retries:
                    k, l = bad[0]
                    raise SamplingError(
                        f"subgraph ({k + 1},{l + 1}) still full or empty after "
                        f"{config.max_retries} retries"
                    )
                retries += 1
                _run_sweeps(graph, spec, beta, rng, config.thinning, active)
        out.append(graph.copy())
    return out


# -- exact enumeration ------------------------------------------------------


def mask_bits(masks: np.ndarray, n_bits: int) -> np.ndarray:
    """Integer masks to a ``(N, n_bits)`` 0/1 matrix; bit ``i`` is label ``i``."""
    masks = np.asarray(masks, dtype=np.int64)
    return ((masks[:, None] >> np.arange(n_bits, dtype=np.int64)) & 1).astype(np.uint8)


def _check_cap(spec: ModelSpec, pair) -> int:
    n = spec.partition.n_labels(pair)
    if n > ENUMERATION_CAP:
        raise CapacityError(
            f"subgraph {pair} has {n} edge labels; exact enumeration is capped at {ENUMERATION_CAP}"
        )
    return n


def _log_weights(spec: ModelSpec, beta: ParameterVector, pair, masks: np.ndarray) -> np.ndarray:
    n = spec.partition.n_labels(pair)
    b = beta.of(family_of(pair))
    stats = eval_bits(spec, pair, mask_bits(masks, n))
    return stats @ b if len(b) else np.zeros(len(masks))


def _chunks(n_masks: int):
    for start in range(0, n_masks, _ENUM_CHUNK):
        yield np.arange(start, min(start + _ENUM_CHUNK, n_masks), dtype=np.int64)


def enumerate_block_distribution(
    spec: ModelSpec, beta: ParameterVector, pair: tuple[int, int]
) -> tuple[np.ndarray, np.ndarray]:
    """Exact law of one subgraph: ``(masks, probabilities)`` over all ``2**n`` states."""
    pair = spec.partition.check_pair(pair)
    beta.check_dims(spec.d1, spec.d2)
    n = _check_cap(spec, pair)
    logw = np.concatenate([_log_weights(spec, beta, pair, c) for c in _chunks(1 << n)])
    probs = np.exp(logw - logsumexp(logw))
    return np.arange(1 << n, dtype=np.int64), probs


def exact_expectation(
    spec: ModelSpec,
    beta: ParameterVector,
    pair: tuple[int, int],
    functional: Callable[[np.ndarray], np.ndarray],
) -> np.ndarray:
    """``E[functional(X_{k,l})]`` by exhaustive enumeration.

    ``functional`` is vectorized: it receives an ``(N, n_bits)`` 0/1 matrix
    and returns ``(N,)`` or ``(N, p)`` values.
    """
    pair = spec.partition.check_pair(pair)
    beta.check_dims(spec.d1, spec.d2)
    n = _check_cap(spec, pair)
    log_z = logsumexp(np.concatenate([_log_weights(spec, beta, pair, c) for c in _chunks(1 << n)]))
    total = None
    for c in _chunks(1 << n):
        p = np.exp(_log_weights(spec, beta, pair, c) - log_z)
        vals = np.asarray(functional(mask_bits(c, n)), dtype=np.float64)
        part = np.tensordot(p, vals, axes=(0, 0))
        total = part if total is None else total + part
    return np.asarray(total)
