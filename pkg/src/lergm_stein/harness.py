"""Experiment configuration and the replicate runner with its CSV output.

Config files are JSON::

    {
      "block_size": 20, "n_blocks": 20,          # or "blocks": [n1, n2, ...]
      "within": ["edges", "gwd(1)"],
      "between": ["edges", "gwd_bipartite(1,1)", "gwd_bipartite(2,1)"],
      "true_beta": {"within": [1.0, -1.0], "between": [1.0, -1.0, -1.0]},
      "sampler": {"burn_in": 1000, "thinning": 1, "reject_degenerate": true},
      "estimator": {"grad_tol": 1e-8, "max_iters": 500},
      "replicates": 30, "seed": 2024, "outputs": "out", "mple": true, "workers": 1
    }

Weight tables are built with length ``M + 1`` for every statistic.
"""

from __future__ import annotations

import csv
import io
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import LergmError
from .estimator import EstimatorConfig, estimate_mple, estimate_stein
from .graph import BlockPartition
from .params import ParameterVector
from .sampler import SamplerConfig, sample_lergm
from .statistics import FAMILIES, ModelSpec, parse_statistic

ESTIMATORS = ("SE", "MPLE")
REPLICATE_COLUMNS = ["replicate", "estimator", "param", "value", "converged"]
SUMMARY_COLUMNS = ["estimator", "param", "true_value", "mse", "std", "included", "excluded"]


def fmt(x) -> str:
    """Round-trip float formatting (17 significant digits)."""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".17g")


def write_csv(path, header: list[str], rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) if not isinstance(v, str) else v for v in row])
    Path(path).write_text(buf.getvalue())


# -- configuration -------------------------------------------------------------


def _partition_from(cfg: dict) -> BlockPartition:
    if "blocks" in cfg:
        return BlockPartition(tuple(int(b) for b in cfg["blocks"]))
    if "block_size" in cfg and "n_blocks" in cfg:
        return BlockPartition.uniform(int(cfg["block_size"]), int(cfg["n_blocks"]))
    raise ValueError("config needs 'blocks' or 'block_size' and 'n_blocks'")


def model_from_config(cfg: dict, partition: BlockPartition | None = None) -> ModelSpec:
    partition = partition or _partition_from(cfg)
    length = partition.M + 1
    within = [parse_statistic(s, length) for s in cfg.get("within", [])]
    between = [parse_statistic(s, length) for s in cfg.get("between", [])]
    return ModelSpec(partition, within, between)


def beta_from_config(obj, spec: ModelSpec) -> ParameterVector:
    if obj is None:
        return ParameterVector.zeros(spec.d1, spec.d2)
    if isinstance(obj, dict):
        beta = ParameterVector(obj.get("within", []), obj.get("between", []))
    else:
        beta = ParameterVector.from_flat(obj, spec.d1)
    beta.check_dims(spec.d1, spec.d2)
    return beta


def sampler_from_config(cfg: dict, seed: int) -> SamplerConfig:
    s = dict(cfg or {})
    return SamplerConfig(
        burn_in=int(s.get("burn_in", 1000)),
        thinning=int(s.get("thinning", 1)),
        seed=int(seed),
        reject_degenerate=bool(s.get("reject_degenerate", True)),
        max_retries=int(s.get("max_retries", 1000)),
    )


def estimator_from_config(cfg: dict, spec: ModelSpec) -> EstimatorConfig:
    e = dict(cfg or {})
    init = e.pop("init", None)
    known = {"grad_tol", "max_iters", "c1", "backtrack", "max_backtracks", "radius_w", "radius_b"}
    unknown = set(e) - known
    if unknown:
        raise ValueError(f"unknown estimator settings {sorted(unknown)}")
    return EstimatorConfig(**e, init=beta_from_config(init, spec) if init is not None else None)


@dataclass
class RunConfig:
    spec: ModelSpec
    true_beta: ParameterVector
    sampler: SamplerConfig
    estimator: EstimatorConfig
    replicates: int = 30
    seed: int = 0
    outputs: str = "out"
    mple: bool = True
    workers: int = 1
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.replicates < 1:
            raise ValueError("replicates must be >= 1")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        self.true_beta.check_dims(self.spec.d1, self.spec.d2)

    @classmethod
    def from_dict(cls, cfg: dict) -> "RunConfig":
        spec = model_from_config(cfg)
        seed = int(cfg.get("seed", 0))
        return cls(
            spec=spec,
            true_beta=beta_from_config(cfg.get("true_beta"), spec),
            sampler=sampler_from_config(cfg.get("sampler"), seed),
            estimator=estimator_from_config(cfg.get("estimator"), spec),
            replicates=int(cfg.get("replicates", 30)),
            seed=seed,
            outputs=str(cfg.get("outputs", "out")),
            mple=bool(cfg.get("mple", True)),
            workers=int(cfg.get("workers", 1)),
            diagnostics=dict(cfg.get("diagnostics", {})),
        )

    @classmethod
    def from_json(cls, path) -> "RunConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def with_seed(self, seed: int) -> "RunConfig":
        return replace(self, seed=int(seed), sampler=replace(self.sampler, seed=int(seed)))


# -- experiment --------------------------------------------------------------


@dataclass
class ReplicateOutcome:
    replicate: int
    estimates: dict  # estimator -> (values array, converged flag)
    seconds: dict  # phase -> wall-clock seconds
    error: str = ""


@dataclass
class SummaryRow:
    estimator: str
    param: str
    true_value: float
    mse: float
    std: float
    included: int
    excluded: int


@dataclass
class SummaryTable:
    rows: list[SummaryRow]

    def get(self, estimator: str, param: str) -> SummaryRow:
        for r in self.rows:
            if r.estimator == estimator and r.param == param:
                return r
        raise KeyError((estimator, param))

    def mse(self, estimator: str = "SE") -> dict[str, float]:
        return {r.param: r.mse for r in self.rows if r.estimator == estimator}


@dataclass
class ExperimentResult:
    summary: SummaryTable
    outcomes: list[ReplicateOutcome]
    param_names: list[str]

    def replicate_rows(self):
        for o in self.outcomes:
            for est, (vals, conv) in o.estimates.items():
                for name, v in zip(self.param_names, vals):
                    yield [o.replicate, est, name, v, conv]


def active_families(spec: ModelSpec) -> tuple[str, ...]:
    return tuple(f for f in FAMILIES if spec.dim(f) > 0)


def run_replicate(config: RunConfig, r: int) -> ReplicateOutcome:
    spec = config.spec
    n = spec.d1 + spec.d2
    names = ESTIMATORS if config.mple else ESTIMATORS[:1]
    seconds = {}
    t0 = time.perf_counter()
    try:
        graph = sample_lergm(
            spec, config.true_beta, config.sampler, replicate=r, families=active_families(spec)
        )[0]
    except LergmError as exc:
        seconds["sample"] = time.perf_counter() - t0
        fail = {e: (np.full(n, np.nan), False) for e in names}
        return ReplicateOutcome(r, fail, seconds, error=str(exc))
    seconds["sample"] = time.perf_counter() - t0
    estimates = {}
    errors = []
    for name, fn in (("SE", estimate_stein), ("MPLE", estimate_mple)):
        if name not in names:
            continue
        t0 = time.perf_counter()
        try:
            res = fn(spec, graph, config.estimator)
            estimates[name] = (res.estimate.flat(), bool(res.converged))
        except LergmError as exc:
            estimates[name] = (np.full(n, np.nan), False)
            errors.append(f"{name}: {exc}")
        seconds[name] = time.perf_counter() - t0
    return ReplicateOutcome(r, estimates, seconds, error="; ".join(errors))


def summarize(outcomes: list[ReplicateOutcome], spec: ModelSpec, truth: ParameterVector) -> SummaryTable:
    """MSE and sample std (ddof=1) of converged replicates, per parameter."""
    names = spec.param_names()
    true_flat = truth.flat()
    rows = []
    estimators = [e for e in ESTIMATORS if any(e in o.estimates for o in outcomes)]
    for est in estimators:
        vals = np.array([o.estimates[est][0] for o in outcomes if est in o.estimates]).reshape(-1, len(names))
        ok = np.array([o.estimates[est][1] for o in outcomes if est in o.estimates], dtype=bool)
        inc = vals[ok]
        for j, name in enumerate(names):
            col = inc[:, j]
            mse = float(np.mean((col - true_flat[j]) ** 2)) if len(col) else float("nan")
            std = float(np.std(col, ddof=1)) if len(col) > 1 else 0.0
            rows.append(SummaryRow(est, name, float(true_flat[j]), mse, std, int(ok.sum()), int((~ok).sum())))
    return SummaryTable(rows)


def run_experiment(config: RunConfig, out_dir=None, progress=None) -> ExperimentResult:
    """Run ``config.replicates`` sample-and-fit replicates and summarize them.

    With ``out_dir`` writes ``replicates.csv``, ``summary.csv`` and a
    ``run_summary.txt`` holding wall-clock timings (kept out of the CSVs so
    those are byte-reproducible).
    """
    reps = range(config.replicates)
    if config.workers > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            outcomes = list(pool.map(lambda r: run_replicate(config, r), reps))
    else:
        outcomes = []
        for r in reps:
            outcomes.append(run_replicate(config, r))
            if progress:
                progress(r, outcomes[-1])
    outcomes.sort(key=lambda o: o.replicate)
    result = ExperimentResult(summarize(outcomes, config.spec, config.true_beta), outcomes, config.spec.param_names())
    if out_dir is not None:
        write_experiment(result, config, out_dir)
    return result


def write_experiment(result: ExperimentResult, config: RunConfig, out_dir) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(out / "replicates.csv", REPLICATE_COLUMNS, result.replicate_rows())
    write_csv(
        out / "summary.csv",
        SUMMARY_COLUMNS,
        ([r.estimator, r.param, r.true_value, r.mse, r.std, r.included, r.excluded] for r in result.summary.rows),
    )
    lines = [f"replicates: {config.replicates}", f"seed: {config.seed}"]
    phases = sorted({p for o in result.outcomes for p in o.seconds})
    for p in phases:
        secs = [o.seconds[p] for o in result.outcomes if p in o.seconds]
        lines.append(f"seconds_{p}_total: {sum(secs):.3f}")
        lines.append(f"seconds_{p}_mean: {np.mean(secs):.4f}")
    for o in result.outcomes:
        if o.error:
            lines.append(f"replicate {o.replicate} error: {o.error}")
    (out / "run_summary.txt").write_text("\n".join(lines) + "\n")
