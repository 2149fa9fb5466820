"""Stein identity checks, moment matrices, explicit bounds and normality checks.

Expectations over one subgraph are computed either exactly, by enumerating
all ``2**n`` label states, or by Monte Carlo from a Glauber chain run on a
stand-alone copy of that subgraph.  Subgraphs of equal shape are identically
distributed, so each distinct shape is handled once and weighted by its
multiplicity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import integrate, special, stats

from .errors import SingularityError
from .estimator import EstimatorConfig, estimate_stein, stein_objective
from .graph import BlockPartition
from .params import ParameterVector
from .sampler import (
    SamplerConfig,
    _check_cap,
    _chunks,
    _log_weights,
    make_rng,
    mask_bits,
    sample_lergm,
)
from .statistics import FAMILIES, ModelSpec, change_bits, family_design, family_of, growth_constants

SINGULAR_TOL = 1e-12
DEFAULT_MC_SAMPLES = 10_000
# "auto" enumerates up to this many labels; above it Monte Carlo is much faster.
AUTO_EXACT_BITS = 20
DEFAULT_MC_SAMPLER = SamplerConfig(burn_in=1000, thinning=10)


# -- state ensembles for one subgraph --------------------------------------


@dataclass
class StateEnsemble:
    """Weighted label states of one subgraph shape."""

    pair: tuple[int, int]
    chunks: Callable  # yields (bits, weights) with weights summing to 1 overall
    method: str


def _exact_ensemble(spec: ModelSpec, beta: ParameterVector, pair) -> StateEnsemble:
    n = _check_cap(spec, pair)
    log_z = special.logsumexp(np.concatenate([_log_weights(spec, beta, pair, c) for c in _chunks(1 << n)]))

    def chunks():
        for c in _chunks(1 << n):
            yield mask_bits(c, n), np.exp(_log_weights(spec, beta, pair, c) - log_z)

    return StateEnsemble(pair, chunks, "exact-enumeration")


def subgraph_spec(spec: ModelSpec, pair: tuple[int, int]) -> tuple[ModelSpec, tuple[int, int]]:
    """Model restricted to a stand-alone copy of subgraph ``pair``."""
    k, l = spec.partition.check_pair(pair)
    sizes = spec.partition.block_sizes
    if k == l:
        sub = ModelSpec(BlockPartition((sizes[k],)), spec.within_stats, [])
        return sub, (0, 0)
    sub = ModelSpec(BlockPartition((sizes[k], sizes[l])), [], spec.between_stats)
    return sub, (0, 1)


def sample_subgraph_states(
    spec: ModelSpec,
    beta: ParameterVector,
    pair: tuple[int, int],
    n_samples: int,
    config: SamplerConfig,
    replicate: int = 0,
) -> np.ndarray:
    """``(n_samples, n_bits)`` Glauber draws of a single subgraph."""
    sub, sub_pair = subgraph_spec(spec, pair)
    fam = family_of(pair)
    sub_beta = ParameterVector(beta.beta_w, []) if fam == "W" else ParameterVector([], beta.beta_b)
    rng = make_rng(config.seed, replicate)
    graphs = sample_lergm(sub, sub_beta, config, n_samples, families=(fam,), rng=rng)
    return np.stack([g.subgraph_bits(sub_pair) for g in graphs])


def _mc_ensemble(spec, beta, pair, n_samples, config, replicate) -> StateEnsemble:
    bits = sample_subgraph_states(spec, beta, pair, n_samples, config, replicate)

    def chunks():
        step = 4096
        for i in range(0, len(bits), step):
            b = bits[i : i + step]
            yield b, np.full(len(b), 1.0 / len(bits))

    return StateEnsemble(pair, chunks, f"monte-carlo({n_samples})")


def _ensemble(spec, beta, pair, method, n_samples, config, replicate=0) -> StateEnsemble:
    if method == "auto":
        method = "exact" if spec.partition.n_labels(pair) <= AUTO_EXACT_BITS else "monte-carlo"
    if method == "exact":
        return _exact_ensemble(spec, beta, pair)
    if method == "monte-carlo":
        return _mc_ensemble(spec, beta, pair, n_samples, config or DEFAULT_MC_SAMPLER, replicate)
    raise ValueError(f"unknown method {method!r}")


# -- Stein identity -------------------------------------------------------------


def _operator_on_stats(spec, beta, pair, bits) -> np.ndarray:
    """``sum_m sigma(t_m) Delta_m s + s(x_{-m}) - s(x)`` for each state."""
    delta = change_bits(spec, pair, bits)
    b = beta.of(family_of(pair))
    t = delta @ b
    x = np.asarray(bits, dtype=np.float64)
    return np.einsum("nm,nmj->nj", special.expit(t) - x, delta)


def _operator_general(spec, beta, pair, bits, test_fn) -> np.ndarray:
    bits = np.asarray(bits, dtype=np.uint8)
    delta = change_bits(spec, pair, bits)
    sig = special.expit(delta @ beta.of(family_of(pair)))
    fx = np.asarray(test_fn(bits), dtype=np.float64).reshape(len(bits), -1)
    out = np.zeros_like(fx)
    for m in range(bits.shape[1]):
        up = bits.copy()
        up[:, m] = 1
        down = bits.copy()
        down[:, m] = 0
        f1 = np.asarray(test_fn(up), dtype=np.float64).reshape(fx.shape)
        f0 = np.asarray(test_fn(down), dtype=np.float64).reshape(fx.shape)
        out += sig[:, m, None] * (f1 - f0) + f0 - fx
    return out


def stein_identity_residual(
    spec: ModelSpec,
    beta: ParameterVector,
    pair: tuple[int, int],
    test_fn: Callable[[np.ndarray], np.ndarray] | None = None,
    method: str = "exact",
    n_samples: int = DEFAULT_MC_SAMPLES,
    sampler_config: SamplerConfig | None = None,
) -> np.ndarray:
    """``E[A f(X_{k,l})]`` for the Glauber Stein operator of one subgraph.

    ``test_fn`` maps an ``(N, n_bits)`` state matrix to ``(N,)`` or
    ``(N, p)`` values; the default is the subgraph statistic itself, for which
    the operator reduces to the Stein summand.
    """
    pair = spec.partition.check_pair(pair)
    beta.check_dims(spec.d1, spec.d2)
    ens = _ensemble(spec, beta, pair, method, n_samples, sampler_config)
    total = None
    for bits, w in ens.chunks():
        vals = (
            _operator_on_stats(spec, beta, pair, bits)
            if test_fn is None
            else _operator_general(spec, beta, pair, bits, test_fn)
        )
        part = w @ vals
        total = part if total is None else total + part
    return np.asarray(total)


# -- moment matrices ---------------------------------------------------------


def inv_sqrt_psd(A: np.ndarray, tol: float = SINGULAR_TOL) -> np.ndarray:
    """``A^{-1/2}`` by symmetric eigendecomposition; no regularization."""
    A = 0.5 * (A + A.T)
    lam, V = np.linalg.eigh(A)
    if lam.size == 0 or lam[0] <= tol:
        lo = lam[0] if lam.size else float("nan")
        raise SingularityError(f"matrix has min eigenvalue {lo:.3g} <= {tol:g}; inverse square root undefined")
    return (V / np.sqrt(lam)) @ V.T


@dataclass
class BlockMoments:
    """Per-shape expectations for one subgraph."""

    egg: np.ndarray  # E[u u^T], u the Stein summand
    eGG: np.ndarray  # E[sum sigma' D D^T]
    eDD: np.ndarray  # E[sum D D^T]
    gvar: float  # E||H - E H||_F^2
    count: int  # number of subgraphs with this shape


@dataclass
class FamilyMoments:
    egg: np.ndarray
    eGG: np.ndarray
    q: np.ndarray | None
    upsilon: float
    xi: float
    gvar: float

    @property
    def egg_inv_sqrt(self) -> np.ndarray:
        return inv_sqrt_psd(self.egg)


@dataclass
class MomentMatrices:
    egg_w: np.ndarray
    eGG_w: np.ndarray
    q_w: np.ndarray | None
    egg_b: np.ndarray
    eGG_b: np.ndarray
    q_b: np.ndarray | None
    upsilon_w: float
    upsilon_b: float
    xi_w: float
    xi_b: float
    method: str
    gvar_w: float = 0.0
    gvar_b: float = 0.0

    def family(self, f: str) -> FamilyMoments:
        if f == "W":
            return FamilyMoments(self.egg_w, self.eGG_w, self.q_w, self.upsilon_w, self.xi_w, self.gvar_w)
        return FamilyMoments(self.egg_b, self.eGG_b, self.q_b, self.upsilon_b, self.xi_b, self.gvar_b)


def _block_moments(spec, beta, ens: StateEnsemble, count: int) -> BlockMoments:
    b = beta.of(family_of(ens.pair))
    d = len(b)
    egg = np.zeros((d, d))
    eGG = np.zeros((d, d))
    eDD = np.zeros((d, d))
    eGG2 = 0.0
    for bits, w in ens.chunks():
        delta = change_bits(spec, ens.pair, bits)
        x = np.asarray(bits, dtype=np.float64)
        s = special.expit(delta @ b)
        u = np.einsum("nm,nmj->nj", s - x, delta)
        H = np.einsum("nm,nmi,nmj->nij", s * (1 - s), delta, delta)
        D = np.einsum("nmi,nmj->nij", delta, delta)
        egg += np.einsum("n,ni,nj->ij", w, u, u)
        eGG += np.tensordot(w, H, axes=(0, 0))
        eDD += np.tensordot(w, D, axes=(0, 0))
        eGG2 += float(w @ np.einsum("nij,nij->n", H, H))
    gvar = max(eGG2 - float(np.sum(eGG * eGG)), 0.0)
    return BlockMoments(egg, eGG, eDD, gvar, count)


def _shape_groups(spec: ModelSpec, family: str) -> dict:
    groups = {}
    for pair in spec.pairs(family):
        shape = spec.partition.shape(pair)
        key = (shape.n_rows, shape.n_cols)
        if key in groups:
            groups[key][1] += 1
        else:
            groups[key] = [pair, 1]
    return groups


def _min_eig(A: np.ndarray) -> float:
    return float(np.linalg.eigvalsh(0.5 * (A + A.T))[0])


def family_moments(
    spec: ModelSpec,
    beta: ParameterVector,
    family: str,
    method: str = "auto",
    n_samples: int = DEFAULT_MC_SAMPLES,
    sampler_config: SamplerConfig | None = None,
    require_q: bool = True,
) -> tuple[FamilyMoments, str]:
    d = spec.dim(family)
    egg = np.zeros((d, d))
    eGG = np.zeros((d, d))
    ups, xi, gvar = math.inf, math.inf, 0.0
    methods = set()
    groups = _shape_groups(spec, family) if d else {}
    for i, (pair, count) in enumerate(groups.values()):
        ens = _ensemble(spec, beta, pair, method, n_samples, sampler_config, replicate=i)
        methods.add(ens.method)
        bm = _block_moments(spec, beta, ens, count)
        egg += count * bm.egg
        eGG += count * bm.eGG
        gvar += count * bm.gvar
        ups = min(ups, _min_eig(bm.egg))
        xi = min(xi, _min_eig(bm.eDD))
    q = None
    if d and np.isfinite(ups):
        try:
            q = inv_sqrt_psd(egg) @ eGG
        except SingularityError:
            if require_q:
                raise
    return FamilyMoments(egg, eGG, q, ups, xi, gvar), "+".join(sorted(methods)) or "none"


def estimate_moment_matrices(
    spec: ModelSpec,
    beta_star: ParameterVector,
    method: str = "auto",
    sampler_config: SamplerConfig | None = None,
    n_samples: int = DEFAULT_MC_SAMPLES,
    require_q: bool = True,
) -> MomentMatrices:
    """``E[g g^T]``, ``E[G]``, ``Q``, ``Upsilon`` and ``xi`` at ``beta_star``.

    ``method`` is ``"exact"``, ``"monte-carlo"`` or ``"auto"`` (exact when a
    subgraph has at most ``AUTO_EXACT_BITS`` labels).  Raises :class:`SingularityError` when
    ``E[g g^T]`` of a family with statistics is singular, unless
    ``require_q`` is false, in which case that ``Q`` is ``None``.
    """
    beta_star.check_dims(spec.d1, spec.d2)
    w, mw = family_moments(spec, beta_star, "W", method, n_samples, sampler_config, require_q)
    b, mb = family_moments(spec, beta_star, "B", method, n_samples, sampler_config, require_q)
    return MomentMatrices(
        egg_w=w.egg, eGG_w=w.eGG, q_w=w.q,
        egg_b=b.egg, eGG_b=b.eGG, q_b=b.q,
        upsilon_w=w.upsilon, upsilon_b=b.upsilon,
        xi_w=w.xi, xi_b=b.xi,
        method=mw if mw == mb or mb == "none" else f"W:{mw},B:{mb}",
        gvar_w=w.gvar, gvar_b=b.gvar,
    )


# -- constants and explicit bounds ------------------------------------------


def clt_constant(tol: float = 1e-12, max_terms: int = 200, return_partials: bool = False):
    """``8 + sum_{k>=1} 4^k / (k k!)``, summed until the increment drops below ``tol``."""
    total = 8.0
    term_ratio = 4.0  # 4^k / k!
    partials = []
    for k in range(1, max_terms + 1):
        if k > 1:
            term_ratio *= 4.0 / k
        inc = term_ratio / k
        total += inc
        partials.append(total)
        if inc < tol:
            break
    return (total, np.array(partials)) if return_partials else total


def covering_integral(d: int) -> float:
    """Dimension factor of the concentration constant.

    ``pi / sin(pi / d)`` for ``d >= 2``.  At ``d = 1`` that expression is
    singular and ``int_0^inf log(1 + 1/e) de`` diverges, so the integral is
    taken over the covering range ``(0, 2]`` instead: ``3 log 3 - 2 log 2``.
    """
    if d < 1:
        raise ValueError("dimension must be >= 1")
    if d >= 2:
        return math.pi / math.sin(math.pi / d)
    val, _ = integrate.quad(lambda e: math.log1p(1.0 / e), 0.0, 2.0)
    return val


def dimension_factor(d: int) -> float:
    return covering_integral(d) + math.sqrt(d) ** (d / 2) * abs(2 - math.sqrt(d) / (math.e + 1) ** (1 / d))


@dataclass(frozen=True)
class ConcentrationInputs:
    K: int
    M: int
    d1: int
    d2: int
    R_W: float
    R_B: float
    L_W: float
    L_B: float
    C_W: float
    C_B: float
    xi_w: float
    xi_b: float


@dataclass(frozen=True)
class ConcentrationReport:
    P: int
    bound_w: float
    bound_b: float
    inputs: ConcentrationInputs


def _one_bound(K, M, d, R, L, C, xi, lead, P) -> float:
    if d == 0:
        return 0.0
    if not xi > 0:
        raise ValueError(f"eigenvalue floor xi must be positive, got {xi}")
    with np.errstate(over="ignore"):
        expo = float(np.exp(R * L * M**C))
    return (
        (1 / math.sqrt(K)) * (1 / xi) * lead * L * dimension_factor(d)
        * P * M ** (5 + C) * expo
    )


def concentration_bound(inputs: ConcentrationInputs, P: int) -> ConcentrationReport:
    """Explicit ``1 - 1/P`` deviation bounds for ``beta_W`` and ``beta_B``.

    A family with no statistics gets bound 0.  Overflow of the exponential
    factor yields ``inf``.
    """
    if P < 1:
        raise ValueError("P must be >= 1")
    i = inputs
    bw = _one_bound(i.K, i.M, i.d1, i.R_W, i.L_W, i.C_W, i.xi_w, 4096 * math.sqrt(2), P)
    bb = _one_bound(i.K, i.M, i.d2, i.R_B, i.L_B, i.C_B, i.xi_b, 16384.0, P)
    return ConcentrationReport(P, bw, bb, inputs)


def concentration_inputs(
    spec: ModelSpec, moments: MomentMatrices, R_W: float, R_B: float
) -> ConcentrationInputs:
    gc = growth_constants(spec)
    part = spec.partition
    return ConcentrationInputs(
        K=part.K, M=part.M, d1=spec.d1, d2=spec.d2, R_W=R_W, R_B=R_B,
        L_W=gc["W"][0], L_B=gc["B"][0], C_W=gc["W"][1], C_B=gc["B"][1],
        xi_w=moments.xi_w, xi_b=moments.xi_b,
    )


# -- replicate experiments -----------------------------------------------------


@dataclass
class ReplicateStats:
    """Monte Carlo summaries of replicate estimates for the Wasserstein terms."""

    mse2_w: float
    mse4_w: float
    mse2_b: float
    mse4_b: float
    grad_norm_w: float
    grad_norm_b: float
    n: int

    @classmethod
    def from_replicates(
        cls, estimates: Sequence[ParameterVector], beta_star: ParameterVector,
        grad_norms_w: Sequence[float], grad_norms_b: Sequence[float],
    ) -> "ReplicateStats":
        ew = np.array([np.sum((e.beta_w - beta_star.beta_w) ** 2) for e in estimates])
        eb = np.array([np.sum((e.beta_b - beta_star.beta_b) ** 2) for e in estimates])
        return cls(
            mse2_w=float(ew.mean()), mse4_w=float((ew**2).mean()),
            mse2_b=float(eb.mean()), mse4_b=float((eb**2).mean()),
            grad_norm_w=float(np.mean(grad_norms_w)), grad_norm_b=float(np.mean(grad_norms_b)),
            n=len(estimates),
        )

    def of(self, f: str):
        if f == "W":
            return self.mse2_w, self.mse4_w, self.grad_norm_w
        return self.mse2_b, self.mse4_b, self.grad_norm_b


@dataclass
class ReplicateRun:
    estimates: list
    converged: np.ndarray
    grad_norms_w: np.ndarray
    grad_norms_b: np.ndarray
    failures: int = 0


def run_replicates(
    spec: ModelSpec,
    beta_star: ParameterVector,
    n_replicates: int,
    sampler_config: SamplerConfig,
    estimator_config: EstimatorConfig | None = None,
) -> ReplicateRun:
    """Sample one graph per replicate and fit the Stein estimator to it.

    Families without statistics are not sampled.
    """
    if n_replicates < 1:
        raise ValueError("n_replicates must be >= 1")
    fams = tuple(f for f in FAMILIES if spec.dim(f) > 0)
    estimates, conv, gw, gb = [], [], [], []
    failures = 0
    for r in range(n_replicates):
        try:
            graph = sample_lergm(spec, beta_star, sampler_config, replicate=r, families=fams)[0]
            res = estimate_stein(spec, graph, estimator_config)
        except Exception:  # counted, not raised: a failed replicate is a bound violation
            failures += 1
            continue
        estimates.append(res.estimate)
        conv.append(res.converged)
        gw.append(_grad_norm(spec, graph, res, "W"))
        gb.append(_grad_norm(spec, graph, res, "B"))
    return ReplicateRun(estimates, np.array(conv, dtype=bool), np.array(gw), np.array(gb), failures)


def _grad_norm(spec, graph, res, family) -> float:
    """Euclidean norm of ``g(X, beta_hat)``."""
    if spec.dim(family) == 0:
        return 0.0
    _, g = stein_objective(*family_design(spec, graph, family), res.estimate.of(family))
    return float(np.linalg.norm(g))


@dataclass
class CoverageReport:
    P: int
    coverage_w: float
    coverage_b: float
    coverage: float
    bound: ConcentrationReport
    n_replicates: int
    failures: int


def empirical_coverage(
    spec: ModelSpec,
    beta_star: ParameterVector,
    P: int,
    n_replicates: int,
    sampler_config: SamplerConfig,
    estimator_config: EstimatorConfig | None = None,
    moments: MomentMatrices | None = None,
    radius: float | None = None,
    run: ReplicateRun | None = None,
) -> CoverageReport:
    """Fraction of replicates with ``||beta_hat - beta_star||`` inside the bound.

    ``radius`` (the ``R`` of the bound) defaults to the estimator's ball radius
    when set, else 50.  Failed replicates count as violations.
    """
    if n_replicates < 1:
        raise ValueError("n_replicates must be >= 1")
    estimator_config = estimator_config or EstimatorConfig()
    if moments is None:
        moments = estimate_moment_matrices(spec, beta_star, sampler_config=sampler_config, require_q=False)
    R_W = radius or estimator_config.radius("W") or 50.0
    R_B = radius or estimator_config.radius("B") or 50.0
    report = concentration_bound(concentration_inputs(spec, moments, R_W, R_B), P)
    if run is None:
        run = run_replicates(spec, beta_star, n_replicates, sampler_config, estimator_config)
    total = len(run.estimates) + run.failures
    dw = np.array([np.linalg.norm(e.beta_w - beta_star.beta_w) for e in run.estimates])
    db = np.array([np.linalg.norm(e.beta_b - beta_star.beta_b) for e in run.estimates])
    in_w = dw <= report.bound_w
    in_b = db <= report.bound_b
    return CoverageReport(
        P=P,
        coverage_w=float(in_w.sum() / total),
        coverage_b=float(in_b.sum() / total),
        coverage=float((in_w & in_b).sum() / total),
        bound=report,
        n_replicates=total,
        failures=run.failures,
    )


# -- normality --------------------------------------------------------------


def wasserstein1_to_normal(sample: np.ndarray) -> float:
    """Exact ``W1`` between the empirical law of ``sample`` and ``N(0, 1)``.

    Integrates ``|F_n - Phi|`` piecewise using the antiderivative
    ``Psi(x) = x Phi(x) + phi(x)`` of ``Phi``.
    """
    x = np.sort(np.asarray(sample, dtype=np.float64))
    n = len(x)
    if n == 0:
        raise ValueError("empty sample")

    def psi(t):
        return t * special.ndtr(t) + stats.norm.pdf(t)

    # left tail: int_{-inf}^{x1} Phi = Psi(x1); right tail: int_{xn}^inf (1 - Phi) = Psi(-xn)
    total = psi(x[0]) + psi(-x[-1])
    a, b = x[:-1], x[1:]
    level = np.arange(1, n) / n
    # Phi crosses the step height at c, so |F_n - Phi| keeps its sign on [a, c] and [c, b]
    c = np.clip(special.ndtri(level), a, b)
    total += np.sum(np.abs(level * (c - a) - (psi(c) - psi(a))))
    total += np.sum(np.abs(level * (b - c) - (psi(b) - psi(c))))
    return float(total)


@dataclass
class NormalityReport:
    ks_w: np.ndarray
    ks_b: np.ndarray
    w1_w: np.ndarray
    w1_b: np.ndarray
    mean_w: np.ndarray
    mean_b: np.ndarray
    cov_w: np.ndarray
    cov_b: np.ndarray
    n_replicates: int
    standardized_w: np.ndarray = field(repr=False, default=None)
    standardized_b: np.ndarray = field(repr=False, default=None)


def _coord_summaries(z: np.ndarray):
    d = z.shape[1]
    if d == 0 or len(z) == 0:
        return np.zeros(0), np.zeros(0), np.zeros(0), np.zeros((0, 0))
    ks = np.array([stats.kstest(z[:, j], "norm").statistic for j in range(d)])
    w1 = np.array([wasserstein1_to_normal(z[:, j]) for j in range(d)])
    cov = np.atleast_2d(np.cov(z, rowvar=False)) if len(z) > 1 else np.zeros((d, d))
    return ks, w1, z.mean(axis=0), cov


def standardize(q: np.ndarray | None, estimates: np.ndarray, truth: np.ndarray) -> np.ndarray:
    if estimates.shape[1] == 0:
        return estimates.copy()
    if q is None:
        raise SingularityError("Q is undefined for this family")
    return (estimates - truth) @ q.T


def normality_from_estimates(
    moments: MomentMatrices, estimates: Sequence[ParameterVector], beta_star: ParameterVector
) -> NormalityReport:
    ew = np.array([e.beta_w for e in estimates]).reshape(len(estimates), -1)
    eb = np.array([e.beta_b for e in estimates]).reshape(len(estimates), -1)
    zw = standardize(moments.q_w, ew, beta_star.beta_w)
    zb = standardize(moments.q_b, eb, beta_star.beta_b)
    ks_w, w1_w, mean_w, cov_w = _coord_summaries(zw)
    ks_b, w1_b, mean_b, cov_b = _coord_summaries(zb)
    return NormalityReport(ks_w, ks_b, w1_w, w1_b, mean_w, mean_b, cov_w, cov_b, len(estimates), zw, zb)


def normality_diagnostic(
    spec: ModelSpec,
    beta_star: ParameterVector,
    n_replicates: int,
    sampler_config: SamplerConfig,
    estimator_config: EstimatorConfig | None = None,
    moments: MomentMatrices | None = None,
    run: ReplicateRun | None = None,
) -> NormalityReport:
    """Standardize replicate estimates by ``Q`` and compare each coordinate to ``N(0, 1)``."""
    if moments is None:
        moments = estimate_moment_matrices(spec, beta_star, sampler_config=sampler_config)
    if run is None:
        run = run_replicates(spec, beta_star, n_replicates, sampler_config, estimator_config)
    return normality_from_estimates(moments, run.estimates, beta_star)


def wasserstein_bound_terms(
    spec: ModelSpec,
    beta_star: ParameterVector,
    moments: MomentMatrices,
    replicate_stats: ReplicateStats,
) -> list[tuple[str, float]]:
    """Per-family terms of the explicit Wasserstein bound with their sums."""
    C = clt_constant()
    part = spec.partition
    K, M = part.K, part.M
    gc = growth_constants(spec)
    out = []
    for fam in FAMILIES:
        d = spec.dim(fam)
        if d == 0:
            continue
        fm = moments.family(fam)
        L, Cg = gc[fam]
        ups = fm.upsilon
        mse2, mse4, gnorm = replicate_stats.of(fam)
        lead = 1.0 if fam == "W" else 4.0
        n_lab = M * (M - 1) / 2 if fam == "W" else M * M
        t1 = (math.sqrt(C) + math.sqrt(2)) * lead * d**0.75 * L**2 / min(ups, ups**0.75) * M ** (3 * Cg + 6) / math.sqrt(K)
        t2 = (K * ups) ** -0.5 * (
            math.sqrt(fm.gvar) * math.sqrt(mse2)
            + d**2 / 20 * K * n_lab * L**3 * M ** (3 * Cg) * math.sqrt(mse4)
        )
        t3 = float(np.linalg.norm(inv_sqrt_psd(fm.egg), 2)) * gnorm
        out += [(f"{fam}_term1", t1), (f"{fam}_term2", t2), (f"{fam}_term3", t3), (f"{fam}_total", t1 + t2 + t3)]
    return out
