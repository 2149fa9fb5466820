"""Command-line interface.

Exit codes: 0 success, 1 usage error, 2 model or numerical error.
Vertex ids in graph files and block indices in messages are 1-based.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np
from scipy.stats import norm as normal

from .diagnostics import (
    ReplicateStats,
    empirical_coverage,
    estimate_moment_matrices,
    normality_from_estimates,
    run_replicates,
    stein_identity_residual,
    wasserstein_bound_terms,
)
from .errors import LergmError
from .estimator import check_assumptions, estimate_mple, estimate_stein
from .graph import LergmGraph
from .harness import (
    RunConfig,
    active_families,
    beta_from_config,
    estimator_from_config,
    fmt,
    model_from_config,
    run_experiment,
    sampler_from_config,
    write_csv,
)
from .params import ParameterVector
from .sampler import sample_lergm
from .statistics import FAMILIES

EXIT_OK, EXIT_USAGE, EXIT_MODEL = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _load_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise UsageError(f"config {path} is not valid JSON: {exc}") from exc


def _load_graph(path) -> LergmGraph:
    try:
        return LergmGraph.read(path)
    except OSError as exc:
        raise UsageError(f"cannot read graph {path}: {exc}") from exc


def _run_config(args) -> RunConfig:
    cfg = _load_json(args.config)
    if getattr(args, "replicates", None) is not None:
        cfg["replicates"] = args.replicates
    if getattr(args, "workers", None) is not None:
        cfg["workers"] = args.workers
    run = RunConfig.from_dict(cfg)
    if args.seed is not None:
        run = run.with_seed(args.seed)
    return run


def _parse_beta(text: str, d1: int, d2: int) -> ParameterVector:
    try:
        vals = [float(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise UsageError(f"--beta must be comma-separated numbers, got {text!r}") from exc
    if len(vals) != d1 + d2:
        raise UsageError(f"--beta needs {d1 + d2} values (within then between), got {len(vals)}")
    return ParameterVector.from_flat(vals, d1)


# -- subcommands --------------------------------------------------------------


def cmd_sample(args) -> int:
    run = _run_config(args)
    out = Path(args.out or run.outputs)
    out.mkdir(parents=True, exist_ok=True)
    graphs = sample_lergm(
        run.spec, run.true_beta, run.sampler, args.n, families=active_families(run.spec)
    )
    width = max(4, len(str(len(graphs))))
    for i, g in enumerate(graphs, start=1):
        g.write(out / f"draw_{i:0{width}d}.txt")
    print(f"wrote {len(graphs)} graph(s) to {out}")
    return EXIT_OK


def cmd_estimate(args) -> int:
    cfg = _load_json(args.config)
    graph = _load_graph(args.graph)
    spec = model_from_config(cfg, graph.partition)
    est_cfg = estimator_from_config(cfg.get("estimator"), spec)
    res = (estimate_mple if args.mple else estimate_stein)(spec, graph, est_cfg)
    record = res.as_record()
    record["estimator"] = "MPLE" if args.mple else "SE"
    for key, val in record.items():
        print(f"{key} = {val if isinstance(val, str) else fmt(val)}")
    if res.message:
        print(f"message = {res.message}")
    if args.out:
        keys = list(record)
        write_csv(args.out, keys, [[record[k] for k in keys]])
    return EXIT_OK


def cmd_check(args) -> int:
    cfg = _load_json(args.config)
    graph = _load_graph(args.graph)
    spec = model_from_config(cfg, graph.partition)
    for line in check_assumptions(spec, graph).lines():
        print(line)
    return EXIT_OK


def cmd_stein_check(args) -> int:
    cfg = _load_json(args.config)
    spec = model_from_config(cfg)
    if args.beta is not None:
        beta = _parse_beta(args.beta, spec.d1, spec.d2)
    else:
        beta = beta_from_config(cfg.get("true_beta"), spec)
    method = "exact" if args.exact else "monte-carlo"
    sampler = sampler_from_config(cfg.get("sampler"), args.seed if args.seed is not None else cfg.get("seed", 0))
    seen = set()
    worst = 0.0
    for fam in FAMILIES:
        if spec.dim(fam) == 0:
            continue
        for pair in spec.pairs(fam):
            shape = spec.partition.shape(pair)
            key = (shape.n_rows, shape.n_cols)
            if key in seen:
                continue
            seen.add(key)
            r = stein_identity_residual(spec, beta, pair, method=method, n_samples=args.samples, sampler_config=sampler)
            norm = float(np.max(np.abs(r)))
            worst = max(worst, norm)
            print(f"subgraph ({pair[0] + 1},{pair[1] + 1}) residual_inf = {fmt(norm)}")
    ok = worst < args.tol
    print(f"max residual = {fmt(worst)} ({'pass' if ok else 'fail'} at {args.tol:g})")
    return EXIT_OK if ok else EXIT_MODEL


def cmd_simulate(args) -> int:
    run = _run_config(args)
    out = Path(args.out or run.outputs)

    def progress(r, outcome):
        if not args.quiet:
            print(f"replicate {r + 1}/{run.replicates} done", file=sys.stderr)

    result = run_experiment(run, out, progress=progress)
    for row in result.summary.rows:
        print(f"{row.estimator:5s} {row.param:10s} mse = {row.mse:.6g}  std = {row.std:.6g}  "
              f"(included {row.included}, excluded {row.excluded})")
    print(f"wrote {out / 'summary.csv'} and {out / 'replicates.csv'}")
    return EXIT_OK


def cmd_diagnose(args) -> int:
    run = _run_config(args)
    out = Path(args.out or run.outputs)
    out.mkdir(parents=True, exist_ok=True)
    diag = run.diagnostics
    spec, truth = run.spec, run.true_beta
    moments = estimate_moment_matrices(
        spec, truth, method=diag.get("method", "auto"), sampler_config=run.sampler,
        n_samples=int(diag.get("n_samples", 10_000)),
    )
    rows = []
    for fam in FAMILIES:
        fm = moments.family(fam)
        for name, mat in (("egg", fm.egg), ("eGG", fm.eGG), ("q", fm.q)):
            if mat is None:
                continue
            for (i, j), v in np.ndenumerate(mat):
                rows.append([fam, name, i + 1, j + 1, v])
        rows += [[fam, "upsilon", 0, 0, fm.upsilon], [fam, "xi", 0, 0, fm.xi]]
    write_csv(out / "moments.csv", ["family", "quantity", "row", "col", "value"], rows)

    reps = run_replicates(spec, truth, run.replicates, run.sampler, run.estimator)
    conc_rows = []
    for P in diag.get("P", [2, 5]):
        cov = empirical_coverage(
            spec, truth, int(P), run.replicates, run.sampler, run.estimator,
            moments=moments, radius=diag.get("radius"), run=reps,
        )
        conc_rows.append([cov.P, cov.bound.bound_w, cov.bound.bound_b, cov.coverage_w, cov.coverage_b, 1 - 1 / cov.P])
    write_csv(out / "concentration.csv",
              ["P", "bound_w", "bound_b", "coverage_w", "coverage_b", "target"], conc_rows)

    norm = normality_from_estimates(moments, reps.estimates, truth)
    nrows, plot_rows = [], []
    for fam, ks, w1, mean, cov, z in (
        ("W", norm.ks_w, norm.w1_w, norm.mean_w, norm.cov_w, norm.standardized_w),
        ("B", norm.ks_b, norm.w1_b, norm.mean_b, norm.cov_b, norm.standardized_b),
    ):
        for j in range(len(ks)):
            nrows.append([fam, j + 1, ks[j], w1[j], mean[j], cov[j, j], norm.n_replicates])
            zs = np.sort(z[:, j])
            quant = normal.ppf((np.arange(len(zs)) + 0.5) / len(zs))
            plot_rows += [[fam, j + 1, i + 1, v, q] for i, (v, q) in enumerate(zip(zs, quant))]
    write_csv(out / "normality.csv", ["family", "coord", "ks", "w1", "mean", "variance", "replicates"], nrows)
    write_csv(out / "plot_data.csv", ["family", "coord", "rank", "standardized", "normal_quantile"], plot_rows)

    stats = ReplicateStats.from_replicates(reps.estimates, truth, reps.grad_norms_w, reps.grad_norms_b)
    terms = wasserstein_bound_terms(spec, truth, moments, stats)
    write_csv(out / "wasserstein_terms.csv", ["term", "value"], terms)

    lines = [f"method: {moments.method}", f"replicates: {norm.n_replicates} (failures {reps.failures})"]
    lines += [f"{r[0]} bound_w={fmt(r[1])} bound_b={fmt(r[2])} coverage_w={fmt(r[3])} coverage_b={fmt(r[4])}"
              for r in conc_rows]
    lines += [f"{r[0]}{r[1]} ks={r[2]:.4f} w1={r[3]:.4f} mean={r[4]:.4f} var={r[5]:.4f}" for r in nrows]
    lines += [f"{name} = {fmt(v)}" for name, v in terms]
    (out / "diagnose_summary.txt").write_text("\n".join(lines) + "\n")
    print("\n".join(lines))
    return EXIT_OK


# -- dispatch -------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="lergm-stein", description="Stein estimation for block-local exponential random graph models.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, out_help="output directory (overrides the config's 'outputs')"):
        sp.add_argument("--config", required=True, help="JSON config file")
        sp.add_argument("--seed", type=int, default=None, help="override the config seed")
        sp.add_argument("--out", default=None, help=out_help)

    sp = sub.add_parser("sample", help="draw graphs by Glauber dynamics")
    common(sp)
    sp.add_argument("--n", type=int, default=1, help="number of draws (default 1)")
    sp.set_defaults(func=cmd_sample)

    sp = sub.add_parser("estimate", help="estimate parameters from a graph file")
    common(sp, out_help="also write the result as a one-row CSV to this path")
    sp.add_argument("--graph", required=True, help="graph text file")
    sp.add_argument("--mple", action="store_true", help="use the pseudo-likelihood estimator")
    sp.set_defaults(func=cmd_estimate)

    sp = sub.add_parser("check-assumptions", help="report the uniqueness conditions for a graph")
    common(sp, out_help="unused")
    sp.add_argument("--graph", required=True, help="graph text file")
    sp.set_defaults(func=cmd_check)

    sp = sub.add_parser("diagnose", help="moment matrices plus concentration/normality diagnostics")
    common(sp)
    sp.add_argument("--replicates", type=int, default=None, help="override the replicate count")
    sp.set_defaults(func=cmd_diagnose)

    sp = sub.add_parser("simulate", help="run the replicate study and write summary.csv, replicates.csv")
    common(sp)
    sp.add_argument("--replicates", type=int, default=None, help="override the replicate count")
    sp.add_argument("--workers", type=int, default=None, help="replicate worker threads")
    sp.add_argument("--quiet", action="store_true", help="no per-replicate progress on stderr")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("stein-check", help="Stein identity residual per subgraph shape")
    common(sp, out_help="unused")
    sp.add_argument("--beta", default=None, help="comma-separated parameters, within then between")
    sp.add_argument("--exact", action="store_true", help="exact enumeration (default Monte Carlo)")
    sp.add_argument("--samples", type=int, default=10_000, help="Monte Carlo draws per subgraph shape")
    sp.add_argument("--tol", type=float, default=1e-8, help="pass threshold on the max residual")
    sp.set_defaults(func=cmd_stein_check)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"lergm-stein: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (LergmError, ValueError) as exc:
        print(f"lergm-stein: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_MODEL


if __name__ == "__main__":
    sys.exit(main())
