"""Stein estimating equations and the minimizer of their convex primitives.

For one family (within ``W`` or between ``B``) write ``t_m = <beta, Delta_m s>``
and ``x_m`` for the observed label, with ``x_{-m}`` the graph with label ``m``
set to 0.  Since ``s(x) - s(x_{-m}) = x_m Delta_m s``,

    G(beta) = sum_m softplus(t_m) - x_m t_m
    g(beta) = sum_m (sigma(t_m) - x_m) Delta_m s
    H(beta) = sum_m sigma'(t_m) Delta_m s Delta_m s^T

which is a logistic regression with the change statistics as covariates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .errors import NumericalError
from .graph import LergmGraph, enumerate_edge_labels
from .params import ParameterVector
from .statistics import FAMILIES, ModelSpec, change_matrix, family_design

EIG_TOL = 1e-10


def softplus(t):
    """``log(1 + e^t)`` without overflow."""
    t = np.asarray(t, dtype=np.float64)
    return np.maximum(t, 0.0) + np.log1p(np.exp(-np.abs(t)))


def link_functions(t):
    """``(sigma, Sigma, sigma', sigma'')`` at ``t``; ``Sigma`` is the softplus primitive."""
    s = expit(t)
    ds = s * (1.0 - s)
    return s, softplus(t), ds, ds * (1.0 - 2.0 * s)


# -- objective pieces on a design ------------------------------------------


def _check_beta(beta, d: int) -> np.ndarray:
    beta = np.atleast_1d(np.asarray(beta, dtype=np.float64))
    if beta.shape != (d,):
        raise ValueError(f"expected a parameter of length {d}, got shape {beta.shape}")
    return beta


def stein_objective(delta: np.ndarray, x: np.ndarray, beta) -> tuple[float, np.ndarray]:
    """``(G, g)`` on a stacked design ``delta`` (``N x d``) with labels ``x``."""
    beta = _check_beta(beta, delta.shape[1])
    t = delta @ beta
    G = float(np.sum(softplus(t) - x * t))
    g = delta.T @ (expit(t) - x)
    return G, g


def stein_hessian(delta: np.ndarray, beta) -> np.ndarray:
    beta = _check_beta(beta, delta.shape[1])
    s = expit(delta @ beta)
    H = (delta * (s * (1.0 - s))[:, None]).T @ delta
    return 0.5 * (H + H.T)


def _objective_scale(delta, x, beta) -> float:
    t = delta @ beta
    return float(np.sum(softplus(t) + np.abs(x * t)))


def objective_and_gradient_W(spec: ModelSpec, graph: LergmGraph, beta_w) -> tuple[float, np.ndarray]:
    return stein_objective(*family_design(spec, graph, "W"), beta_w)


def objective_and_gradient_B(spec: ModelSpec, graph: LergmGraph, beta_b) -> tuple[float, np.ndarray]:
    return stein_objective(*family_design(spec, graph, "B"), beta_b)


def hessian_W(spec: ModelSpec, graph: LergmGraph, beta_w) -> np.ndarray:
    return stein_hessian(family_design(spec, graph, "W")[0], beta_w)


def hessian_B(spec: ModelSpec, graph: LergmGraph, beta_b) -> np.ndarray:
    return stein_hessian(family_design(spec, graph, "B")[0], beta_b)


def block_summand(delta: np.ndarray, x: np.ndarray, beta) -> np.ndarray:
    """Stein summand of one subgraph: ``sum_m (sigma(t_m) - x_m) Delta_m s``."""
    return stein_objective(delta, x, beta)[1]


# -- pseudo-likelihood --------------------------------------------------------


def pseudo_loglik(delta: np.ndarray, x: np.ndarray, beta) -> tuple[float, np.ndarray]:
    """Logistic log pseudo-likelihood and its gradient.

    Each label contributes ``x log sigma(t) + (1 - x) log(1 - sigma(t))``.
    """
    beta = _check_beta(beta, delta.shape[1])
    t = delta @ beta
    ll = -float(np.sum(x * softplus(-t) + (1 - x) * softplus(t)))
    grad = delta.T @ (x - expit(t))
    return ll, grad


# -- optimizer ------------------------------------------------------------


@dataclass(frozen=True)
class EstimatorConfig:
    grad_tol: float = 1e-8
    max_iters: int = 500
    c1: float = 1e-4
    backtrack: float = 0.5
    max_backtracks: int = 60
    radius_w: float | None = None
    radius_b: float | None = None
    init: ParameterVector | None = None

    def __post_init__(self):
        if not self.grad_tol > 0:
            raise ValueError("grad_tol must be positive")
        if not 0 < self.c1 < 1:
            raise ValueError("c1 must lie in (0, 1)")
        if not 0 < self.backtrack < 1:
            raise ValueError("backtrack must lie in (0, 1)")
        if self.max_iters < 0:
            raise ValueError("max_iters must be >= 0")
        for r in (self.radius_w, self.radius_b):
            if r is not None and not r > 0:
                raise ValueError("radii must be positive")

    def radius(self, family: str) -> float | None:
        r = self.radius_w if family == "W" else self.radius_b
        return None if r is None or math.isinf(r) else float(r)


@dataclass
class FamilyFit:
    estimate: np.ndarray
    converged: bool
    iterations: int
    grad_norm: float
    objective: float
    hessian_min_eig: float
    on_boundary: bool
    message: str = ""
    trace: list = field(default_factory=list)


@dataclass
class EstimationResult:
    estimate: ParameterVector
    converged: bool
    iterations: int
    final_grad_norm: float
    final_objective_w: float
    final_objective_b: float
    hessian_min_eig_w: float
    hessian_min_eig_b: float
    on_boundary: bool
    fits: dict = field(default_factory=dict)

    @property
    def message(self) -> str:
        return "; ".join(f"{f}: {fit.message}" for f, fit in self.fits.items() if fit.message)

    def as_record(self) -> dict:
        rec = {}
        for j, v in enumerate(self.estimate.beta_w):
            rec[f"beta_W{j + 1}"] = float(v)
        for j, v in enumerate(self.estimate.beta_b):
            rec[f"beta_B{j + 1}"] = float(v)
        rec.update(
            converged=self.converged,
            iterations=self.iterations,
            final_grad_norm=self.final_grad_norm,
            final_objective_w=self.final_objective_w,
            final_objective_b=self.final_objective_b,
            hessian_min_eig_w=self.hessian_min_eig_w,
            hessian_min_eig_b=self.hessian_min_eig_b,
            on_boundary=self.on_boundary,
        )
        return rec


def _project(beta: np.ndarray, radius: float | None) -> np.ndarray:
    if radius is None:
        return beta
    norm = np.linalg.norm(beta)
    return beta if norm <= radius else beta * (radius / norm)


def _min_eig(H: np.ndarray) -> float:
    return float(np.linalg.eigvalsh(H)[0]) if H.size else float("nan")


def minimize_convex(
    fun,
    hess,
    x0: np.ndarray,
    config: EstimatorConfig,
    radius: float | None = None,
):
    """Projected BFGS with Armijo backtracking.

    ``fun(beta) -> (value, gradient, scale)`` where ``scale`` bounds the
    magnitude of the summed terms and sets the roundoff slack allowed in the
    sufficient-decrease test.  ``hess(beta)`` seeds the inverse-Hessian
    approximation at the start point.

    Returns ``(beta, value, gradient, iterations, converged, message, trace)``.
    """
    x = _project(np.asarray(x0, dtype=np.float64).copy(), radius)
    n = len(x)

    def evaluate(b):
        f, g, scale = fun(b)
        if not (np.isfinite(f) and np.all(np.isfinite(g))):
            raise NumericalError(f"non-finite objective or gradient at beta = {b.tolist()}")
        return f, g, scale

    f, g, scale = evaluate(x)
    H0 = hess(x)
    try:
        np.linalg.cholesky(H0)
        Hinv = np.linalg.inv(H0)
    except np.linalg.LinAlgError:
        Hinv = np.eye(n) / max(1.0, float(np.linalg.norm(g)))
    trace = [f]

    def stationarity(b, grad):
        return float(np.max(np.abs(b - _project(b - grad, radius)))) if n else 0.0

    message = ""
    for it in range(config.max_iters + 1):
        if stationarity(x, g) <= config.grad_tol:
            return x, f, g, it, True, "", trace
        if it == config.max_iters:
            message = f"no convergence after {config.max_iters} iterations"
            break
        p = -Hinv @ g
        if g @ p >= 0:
            Hinv = np.eye(n) / max(1.0, float(np.linalg.norm(g)))
            p = -Hinv @ g
        slack = 64 * np.finfo(float).eps * scale
        step = 1.0
        for _ in range(config.max_backtracks):
            xn = _project(x + step * p, radius)
            fn, gn, scale_n = evaluate(xn)
            if fn <= f + config.c1 * (g @ (xn - x)) + slack:
                break
            step *= config.backtrack
        else:
            message = "line search failed to find sufficient decrease"
            break
        s, y = xn - x, gn - g
        if np.array_equal(xn, x):
            message = "step vanished"
            break
        sy = s @ y
        if sy > 1e-12 * np.linalg.norm(s) * np.linalg.norm(y):
            rho = 1.0 / sy
            V = np.eye(n) - rho * np.outer(s, y)
            Hinv = V @ Hinv @ V.T + rho * np.outer(s, s)
        x, f, g, scale = xn, fn, gn, scale_n
        trace.append(f)
    converged = stationarity(x, g) <= config.grad_tol
    return x, f, g, it, converged, "" if converged else message, trace


def _fit_family(delta, x, family: str, config: EstimatorConfig, negate_loglik: bool) -> FamilyFit:
    d = delta.shape[1]
    init = config.init.of(family) if config.init is not None else np.zeros(d)
    init = _check_beta(init, d) if d else np.zeros(0)
    radius = config.radius(family)
    if d == 0:
        return FamilyFit(np.zeros(0), True, 0, 0.0, 0.0, float("nan"), False)

    if negate_loglik:
        def fun(b):
            ll, grad = pseudo_loglik(delta, x, b)
            return -ll, -grad, _objective_scale(delta, x, b)
    else:
        def fun(b):
            G, g = stein_objective(delta, x, b)
            return G, g, _objective_scale(delta, x, b)

    def hess(b):
        return stein_hessian(delta, b)

    degenerate = len(x) == 0 or x.min() == x.max()
    if degenerate and radius is None:
        b = _project(init, radius)
        f, g, _ = fun(b)
        return FamilyFit(
            b, False, 0, float(np.max(np.abs(g))), f, _min_eig(hess(b)), False,
            message="observed subgraphs all empty or all full; no finite minimizer",
        )

    b, f, g, iters, converged, message, trace = minimize_convex(fun, hess, init, config, radius)
    on_boundary = radius is not None and np.linalg.norm(b) >= radius * (1 - 1e-12)
    return FamilyFit(
        estimate=b,
        converged=bool(converged),
        iterations=iters,
        grad_norm=float(np.max(np.abs(g))),
        objective=float(f),
        hessian_min_eig=_min_eig(hess(b)),
        on_boundary=bool(on_boundary),
        message=message,
        trace=trace,
    )


def _estimate(spec: ModelSpec, graph: LergmGraph, config: EstimatorConfig | None, mple: bool):
    config = config or EstimatorConfig()
    if graph.partition != spec.partition:
        raise ValueError("graph partition does not match the model")
    if config.init is not None:
        config.init.check_dims(spec.d1, spec.d2)
    fits = {f: _fit_family(*family_design(spec, graph, f), f, config, mple) for f in FAMILIES}
    w, b = fits["W"], fits["B"]
    return EstimationResult(
        estimate=ParameterVector(w.estimate, b.estimate),
        converged=w.converged and b.converged,
        iterations=max(w.iterations, b.iterations),
        final_grad_norm=max(w.grad_norm, b.grad_norm),
        final_objective_w=w.objective,
        final_objective_b=b.objective,
        hessian_min_eig_w=w.hessian_min_eig,
        hessian_min_eig_b=b.hessian_min_eig,
        on_boundary=w.on_boundary or b.on_boundary,
        fits=fits,
    )


def estimate_stein(spec: ModelSpec, graph: LergmGraph, config: EstimatorConfig | None = None) -> EstimationResult:
    """Minimize ``G_W`` and ``G_B`` separately."""
    return _estimate(spec, graph, config, mple=False)


def estimate_mple(spec: ModelSpec, graph: LergmGraph, config: EstimatorConfig | None = None) -> EstimationResult:
    """Maximize the logistic pseudo-likelihood with the same optimizer.

    ``final_objective_*`` hold the negative log pseudo-likelihood.
    """
    return _estimate(spec, graph, config, mple=True)


# -- assumption checks ------------------------------------------------------

HOLDS = "holds"
FAILS = "fails"
NOT_CHECKED = "not-checked"
GUARANTEED = "unique-minimizer-guaranteed"
NOT_GUARANTEED = "not-guaranteed"


@dataclass(frozen=True)
class Verdict:
    status: str
    detail: str = ""

    @property
    def holds(self) -> bool:
        return self.status == HOLDS


def _combine(*verdicts: Verdict) -> Verdict:
    failed = [v for v in verdicts if v.status != HOLDS]
    if not failed:
        return Verdict(HOLDS, "; ".join(v.detail for v in verdicts if v.detail))
    return Verdict(failed[0].status, "; ".join(v.detail for v in failed if v.detail))


@dataclass
class AssumptionReport:
    conditions: dict
    guaranteed_w: bool
    guaranteed_b: bool

    @property
    def overall(self) -> str:
        c = self.conditions
        base = all(c[k].holds for k in ("i", "ii", "iii"))
        plain = all(c[k].holds for k in ("iv", "v", "vi", "vii"))
        primed = all(c[k].holds for k in ("iv'", "v'", "vi'", "vii'"))
        return GUARANTEED if base and (plain or primed) else NOT_GUARANTEED

    @property
    def guaranteed(self) -> bool:
        return self.overall == GUARANTEED

    def lines(self) -> list[str]:
        out = [f"({k}) {v.status}" + (f": {v.detail}" if v.detail else "") for k, v in self.conditions.items()]
        out.append(f"overall: {self.overall}")
        return out


def _sign_check(spec: ModelSpec, family: str, sign: int) -> tuple[Verdict, Verdict]:
    """Exact check of the sign conditions over every reachable state.

    ``Delta_m s`` depends only on the endpoint degrees ``(deg0(u), deg0(v))``
    in ``x_{-m}``, which range independently over ``[0, n-2]`` in a
    within block of size ``n`` and over ``[0, n_cols-1] x [0, n_rows-1]`` in
    a bipartite block.  The removal difference is ``x_m Delta_m s``, so
    the first condition reduces to ``sign * Delta >= 0`` everywhere and the
    second to ``sign * Delta >= 0`` on states with ``x_m = 0``, the same set.
    """
    tables = spec.tables(family)
    if tables.d == 0 or not spec.pairs(family):
        return Verdict(HOLDS, f"{family}: vacuous"), Verdict(HOLDS, f"{family}: vacuous")
    shapes = {}
    for p in spec.pairs(family):
        shape = spec.partition.shape(p)
        shapes.setdefault((shape.n_rows, shape.n_cols), (shape, p))
    for shape, pair in shapes.values():
        if shape.bipartite:
            ru, rv = shape.n_cols, shape.n_rows
        else:
            ru = rv = shape.n_rows - 1
        for j in range(tables.d):
            du = sign * tables.du[j, :ru]
            dv = sign * tables.dv[j, :rv]
            c = sign * tables.const[j]
            a, b = int(np.argmin(du)), int(np.argmin(dv))
            worst = c + du[a] + dv[b]
            if worst < 0:
                where = (
                    f"{family} statistic {j + 1} in subgraph ({pair[0] + 1},{pair[1] + 1}): "
                    f"change {sign * worst:.6g} at endpoint degrees ({a}, {b})"
                )
                return Verdict(FAILS, where), Verdict(FAILS, where)
    return Verdict(HOLDS), Verdict(HOLDS)


def _witness_check(spec: ModelSpec, graph: LergmGraph, family: str, sign: int) -> Verdict:
    """Per coordinate: a label with ``sign * r > 0`` and one with ``sign * (Delta - r) > 0``."""
    d = spec.dim(family)
    pairs = spec.pairs(family)
    if d == 0 or not pairs:
        return Verdict(HOLDS, f"{family}: vacuous")
    first = [None] * d
    second = [None] * d
    for pair in pairs:
        delta, x = change_matrix(spec, graph, pair)
        r = delta * x[:, None]
        a = sign * r > 0
        b = sign * (delta - r) > 0
        if not (a.any() or b.any()):
            continue
        labels = None
        for j in range(d):
            for store, hits in ((first, a[:, j]), (second, b[:, j])):
                if store[j] is None and hits.any():
                    labels = labels or enumerate_edge_labels(spec.partition, pair)
                    m = labels[int(np.argmax(hits))]
                    store[j] = f"({m.u + 1},{m.v + 1})"
        if all(first) and all(second):
            break
    missing = [j + 1 for j in range(d) if first[j] is None or second[j] is None]
    if missing:
        return Verdict(FAILS, f"{family}: no witness for statistic(s) {missing}")
    return Verdict(HOLDS, f"{family}: witnesses m={first}, m'={second}")


def _rank_check(spec: ModelSpec, graph: LergmGraph, family: str) -> Verdict:
    d = spec.dim(family)
    if d == 0 or not spec.pairs(family):
        return Verdict(HOLDS, f"{family}: vacuous")
    delta, _ = family_design(spec, graph, family)
    lam = float(np.linalg.eigvalsh(delta.T @ delta)[0])
    if lam > EIG_TOL:
        return Verdict(HOLDS, f"{family}: min eigenvalue {lam:.6g}")
    return Verdict(FAILS, f"{family}: summed change outer products have min eigenvalue {lam:.3g}")


def check_assumptions(spec: ModelSpec, graph: LergmGraph) -> AssumptionReport:
    """Sufficient conditions for a unique finite Stein estimate."""
    part = spec.partition
    K, M = part.K, part.M
    cap_w = K * M * (M - 1) // 2
    cap_b = K * (K - 1) // 2 * M * M
    dim_w = Verdict(HOLDS, f"d1={spec.d1} <= {cap_w}") if spec.d1 <= cap_w else Verdict(FAILS, f"d1={spec.d1} > {cap_w}")
    dim_b = Verdict(HOLDS, f"d2={spec.d2} <= {cap_b}") if spec.d2 <= cap_b else Verdict(FAILS, f"d2={spec.d2} > {cap_b}")

    plain = {f: _sign_check(spec, f, +1) for f in FAMILIES}
    primed = {f: _sign_check(spec, f, -1) for f in FAMILIES}
    wit = {f: _witness_check(spec, graph, f, +1) for f in FAMILIES}
    wit_p = {f: _witness_check(spec, graph, f, -1) for f in FAMILIES}
    rank = {f: _rank_check(spec, graph, f) for f in FAMILIES}

    conditions = {
        "i": _combine(dim_w, dim_b),
        "ii": rank["W"],
        "iii": rank["B"],
        "iv": _combine(plain["W"][0], plain["B"][0]),
        "v": _combine(plain["W"][1], plain["B"][1]),
        "vi": wit["W"],
        "vii": wit["B"],
        "iv'": _combine(primed["W"][0], primed["B"][0]),
        "v'": _combine(primed["W"][1], primed["B"][1]),
        "vi'": wit_p["W"],
        "vii'": wit_p["B"],
    }

    def family_ok(f, dim):
        plain_ok = plain[f][0].holds and plain[f][1].holds and wit[f].holds
        primed_ok = primed[f][0].holds and primed[f][1].holds and wit_p[f].holds
        return dim.holds and rank[f].holds and (plain_ok or primed_ok)

    return AssumptionReport(conditions, family_ok("W", dim_w), family_ok("B", dim_b))
