"""Command-line front end: system-definition files, watermark grammar,
sweep CSV emission, and one subcommand per library operation.

System-definition format (flat keyed sections, row-major values):

    [system]
    n = 2
    m = 1
    p = 2
    A = 0.75, 0.2, 0.2, 1.0
    B = 0.9, 0.5, 0.1, 1.2
    C = 1.0, -1.0
    Q = 1, 0, 0, 1
    R = 1
    W = 1, 0, 0, 2
    U = 0.4, 0, 0, 0.7

Watermark grammar: ``diag:v1,...,vp`` | ``rank1:u1,...,up,lambda`` |
``opt:J``. Sweep CSV columns: delta_lqg, sigma_e_kind, sigma_e_params,
kld_nats, sadd_theory, add_empirical, add_ci, false_alarm_trials,
trials, seed.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import sys as _sysmod
from importlib import resources
from pathlib import Path

import numpy as np

from . import _kernel, stats
from .detector import LlrModel
from .errors import DimensionMismatch, MissingKey, ParseError, ReplaywmError
from .experiments import (
    BenchmarkSystem,
    BENCHMARK_NAMES,
    CampaignConfig,
    SweepResult,
    SweepRow,
    WatermarkGrid,
    benchmark,
    estimate_arl,
    sweep_sadd_vs_dlqg,
)
from .linalg import SolverOptions, dare_residual, spectral_radius
from .optimize import OptimizerConfig, WatermarkSpec, optimize_watermark
from .plant import DEFAULT_BURN_IN, SystemModel, design, draw_noise

SWEEP_COLUMNS = (
    "delta_lqg",
    "sigma_e_kind",
    "sigma_e_params",
    "kld_nats",
    "sadd_theory",
    "add_empirical",
    "add_ci",
    "false_alarm_trials",
    "trials",
    "seed",
)

_REQUIRED_KEYS = ("n", "m", "p", "A", "B", "C", "Q", "R", "W", "U")
_MATRIX_SHAPES = {
    "A": ("n", "n"),
    "B": ("n", "p"),
    "C": ("m", "n"),
    "Q": ("n", "n"),
    "R": ("m", "m"),
    "W": ("n", "n"),
    "U": ("p", "p"),
}


def parse_config(path) -> SystemModel:
    """Load and validate a system-definition file."""
    parser = configparser.ConfigParser()
    try:
        text = Path(path).read_text()
        parser.read_string(text, source=str(path))
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    except configparser.Error as exc:
        raise ParseError(f"{path}: {exc}") from exc
    if not parser.has_section("system"):
        raise ParseError(f"{path}: missing [system] section")
    section = parser["system"]
    for key in _REQUIRED_KEYS:
        if key not in section:
            raise MissingKey(key)

    dims = {}
    for key in ("n", "m", "p"):
        try:
            dims[key] = int(section[key])
        except ValueError as exc:
            raise ParseError(f"key {key!r}: expected an integer, got {section[key]!r}") from exc
        if dims[key] < 1:
            raise ParseError(f"key {key!r} must be positive")

    matrices = {}
    for key, (rows_key, cols_key) in _MATRIX_SHAPES.items():
        rows, cols = dims[rows_key], dims[cols_key]
        raw = section[key]
        try:
            values = [float(tok) for tok in raw.split(",")]
        except ValueError as exc:
            raise ParseError(f"key {key!r}: non-numeric entry in {raw!r}") from exc
        if len(values) != rows * cols:
            raise DimensionMismatch(
                f"key {key!r}: expected {rows}x{cols} = {rows * cols} entries, got {len(values)}"
            )
        matrices[key] = np.array(values).reshape(rows, cols)
    return SystemModel(**matrices)


def shipped_system_path(name: str):
    """Path to a bundled system-definition file."""
    return resources.files("replaywm").joinpath("systems", f"{name}.cfg")


def resolve_system(value: str) -> BenchmarkSystem:
    """Map --system to a benchmark name or a definition-file path.

    File-based systems default to arl_h 1000 and watermark lag 1;
    benchmark names carry their own defaults.
    """
    if value in BENCHMARK_NAMES:
        return benchmark(value)
    model = parse_config(value)
    return BenchmarkSystem(name=str(value), model=model, arl_h=1000.0, default_watermark_lag=1)


def parse_sigma_e(spec: str, p: int, args, bench: BenchmarkSystem) -> WatermarkSpec:
    """Parse the watermark grammar; ``opt:J`` runs the optimizer."""
    kind, _, payload = spec.partition(":")
    if not payload:
        raise ParseError(f"watermark spec {spec!r} must look like kind:values")
    try:
        values = [float(tok) for tok in payload.split(",")]
    except ValueError as exc:
        raise ParseError(f"watermark spec {spec!r}: non-numeric entry") from exc
    if kind == "diag":
        if len(values) != p:
            raise DimensionMismatch(f"diag spec needs {p} values, got {len(values)}")
        return WatermarkSpec.diagonal(values)
    if kind == "rank1":
        if len(values) != p + 1:
            raise DimensionMismatch(f"rank1 spec needs {p} direction values plus lambda")
        direction, scale = np.array(values[:p]), values[p]
        if scale < 0:
            raise ParseError("rank1 lambda must be nonnegative")
        return WatermarkSpec.rank_one(direction, scale)
    if kind == "opt":
        if len(values) != 1:
            raise ParseError("opt spec takes a single budget value")
        des = design(bench.model, _solver_opts(args))
        cfg = OptimizerConfig(seed=args.seed, restarts=args.restarts)
        spec_out, _ = optimize_watermark(
            bench.model, des, values[0], cfg, _lag(args, bench), _solver_opts(args)
        )
        return spec_out
    raise ParseError(f"unknown watermark kind {kind!r} (expected diag, rank1, or opt)")


def write_sweep_csv(result: SweepResult, path) -> None:
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(SWEEP_COLUMNS)
        for row in result:
            writer.writerow(
                [
                    repr(row.delta_lqg),
                    row.sigma_e_kind,
                    row.sigma_e_params,
                    repr(row.kld_nats),
                    repr(row.sadd_theory),
                    repr(row.add_empirical),
                    repr(row.add_ci),
                    row.false_alarm_trials,
                    row.trials,
                    row.seed,
                ]
            )


def read_sweep_csv(path) -> SweepResult:
    with open(path, newline="") as handle:
        reader = csv.reader(handle)
        header = tuple(next(reader))
        if header != SWEEP_COLUMNS:
            raise ParseError(f"unexpected sweep header {header}")
        rows = [
            SweepRow(
                delta_lqg=float(rec[0]),
                sigma_e_kind=rec[1],
                sigma_e_params=rec[2],
                kld_nats=float(rec[3]),
                sadd_theory=float(rec[4]),
                add_empirical=float(rec[5]),
                add_ci=float(rec[6]),
                false_alarm_trials=int(rec[7]),
                trials=int(rec[8]),
                seed=int(rec[9]),
            )
            for rec in reader
        ]
    return SweepResult(rows=tuple(rows))


def _solver_opts(args) -> SolverOptions:
    return SolverOptions(zero_threshold=args.zero_threshold)


def _lag(args, bench: BenchmarkSystem) -> int:
    return args.lag if args.lag is not None else bench.default_watermark_lag


def _arl_h(args, bench: BenchmarkSystem) -> float:
    return args.arl_h if args.arl_h is not None else bench.arl_h


def _fmt_matrix(name: str, matrix: np.ndarray) -> str:
    flat = ", ".join(f"{x:.10g}" for x in np.asarray(matrix).ravel())
    return f"{name} ({matrix.shape[0]}x{matrix.shape[1]}): {flat}"


def _cmd_design(args) -> int:
    bench = resolve_system(args.system)
    opts = _solver_opts(args)
    des = design(bench.model, opts)
    sysm = bench.model
    print(f"system = {bench.name}")
    for name, mat in (("P", des.P), ("K", des.K), ("S", des.S), ("L", des.L),
                      ("Sigma_gamma", des.Sigma_gamma)):
        print(_fmt_matrix(name, mat))
    print(f"rho_closed_loop = {spectral_radius(des.Acl):.10g}")
    print(f"riccati_residual_P = {dare_residual(des.P, sysm.A, sysm.C, sysm.Q, sysm.R):.3e}")
    print(f"riccati_residual_S = {dare_residual(des.S, sysm.A.T, sysm.B.T, sysm.W, sysm.U):.3e}")
    return 0


def _cmd_kld(args) -> int:
    bench = resolve_system(args.system)
    opts = _solver_opts(args)
    des = design(bench.model, opts)
    spec = parse_sigma_e(args.sigma_e, bench.model.p, args, bench)
    lag = _lag(args, bench)
    analysis = stats.analyze(bench.model, des, spec.Sigma_e, lag, opts)
    arl_h = _arl_h(args, bench)
    print(f"kld_nats = {analysis.kld!r}")
    print(f"sadd_theory = {analysis.sadd_theory(arl_h)!r}")
    print(f"delta_lqg = {analysis.delta_lqg!r}")
    print(f"watermark_lag = {lag}")
    print(f"arl_h = {arl_h!r}")
    return 0


def _cmd_delta_lqg(args) -> int:
    bench = resolve_system(args.system)
    opts = _solver_opts(args)
    des = design(bench.model, opts)
    spec = parse_sigma_e(args.sigma_e, bench.model.p, args, bench)
    print(f"delta_lqg = {stats.delta_lqg(bench.model, des, spec.Sigma_e, opts)!r}")
    return 0


def _cmd_optimize(args) -> int:
    bench = resolve_system(args.system)
    opts = _solver_opts(args)
    des = design(bench.model, opts)
    lag = _lag(args, bench)
    cfg = OptimizerConfig(seed=args.seed, restarts=args.restarts)
    spec, kld_value = optimize_watermark(bench.model, des, args.budget, cfg, lag, opts)
    print(f"v_lambda = {', '.join(repr(float(x)) for x in spec.vector)}")
    print(f"lambda_e = {spec.eigenvalue!r}")
    print(f"kld_nats = {kld_value!r}")
    print(f"delta_lqg = {stats.delta_lqg(bench.model, des, spec.Sigma_e, opts)!r}")
    print(f"sadd_theory = {stats.sadd_theory(kld_value, _arl_h(args, bench))!r}")
    return 0


def _cmd_sweep(args) -> int:
    bench = resolve_system(args.system)
    if (args.grid is None) == (args.opt_budgets is None):
        raise ParseError("provide exactly one of --grid or --opt-budgets")
    if args.grid is not None:
        grid = WatermarkGrid("diag", tuple(float(x) for x in args.grid.split(",")))
    else:
        grid = WatermarkGrid("optimized", tuple(float(x) for x in args.opt_budgets.split(",")))
    campaign = CampaignConfig(
        trials=args.trials, nu=args.nu, k0=args.k0, delay_cap=args.delay_cap, seed=args.seed
    )
    bench_run = BenchmarkSystem(
        name=bench.name, model=bench.model, arl_h=_arl_h(args, bench),
        default_watermark_lag=bench.default_watermark_lag,
    )
    result = sweep_sadd_vs_dlqg(
        bench_run, grid, campaign, watermark_lag=_lag(args, bench), opts=_solver_opts(args)
    )
    write_sweep_csv(result, args.out)
    print(f"wrote {len(result)} rows to {args.out}")
    return 0


def _cmd_simulate(args) -> int:
    bench = resolve_system(args.system)
    opts = _solver_opts(args)
    des = design(bench.model, opts)
    spec = parse_sigma_e(args.sigma_e, bench.model.p, args, bench)
    lag = _lag(args, bench)
    arl_h = _arl_h(args, bench)
    analysis = stats.analyze(bench.model, des, spec.Sigma_e, lag, opts)
    model = LlrModel.from_analysis(analysis, opts.zero_threshold)
    if args.nu:
        if not (1 <= args.k0 < args.nu):
            raise ParseError("simulate with attack requires 1 <= k0 < nu")
        if args.nu > args.horizon:
            raise ParseError("attack start nu is beyond the horizon")
    w, v, e = draw_noise(
        bench.model, spec.Sigma_e, DEFAULT_BURN_IN + args.horizon, args.seed, opts.zero_threshold
    )
    out = _kernel.run_loop(
        sys=bench.model, des=des, w=w, v=v, e=e, burn_in=DEFAULT_BURN_IN,
        nu=args.nu, k0=args.k0 if args.nu else 0,
        model=model, threshold=float(np.log(arl_h)), watermark_lag=lag,
    )
    first_alarm = out.alarm_pre if out.alarm_pre else out.alarm_post
    print(f"steps = {out.steps}")
    print(f"first_alarm = {first_alarm}")
    print(f"g_final = {float(out.g[-1])!r}")
    if args.out:
        with open(args.out, "w", newline="") as handle:
            writer = csv.writer(handle)
            m, p = bench.model.m, bench.model.p
            header = (
                ["k"]
                + [f"y{i}" for i in range(m)]
                + [f"gamma{i}" for i in range(m)]
                + [f"e{i}" for i in range(p)]
                + [f"u{i}" for i in range(p)]
                + ["attacked", "g"]
            )
            writer.writerow(header)
            for i in range(out.steps):
                writer.writerow(
                    [i + 1]
                    + [repr(float(x)) for x in out.y_delivered[i]]
                    + [repr(float(x)) for x in out.gamma[i]]
                    + [repr(float(x)) for x in out.e[i]]
                    + [repr(float(x)) for x in out.u[i]]
                    + [int(out.attacked[i]), repr(float(out.g[i]))]
                )
        print(f"wrote {out.steps} steps to {args.out}")
    return 0


def _cmd_arl(args) -> int:
    bench = resolve_system(args.system)
    opts = _solver_opts(args)
    des = design(bench.model, opts)
    spec = parse_sigma_e(args.sigma_e, bench.model.p, args, bench)
    est = estimate_arl(
        bench.model, des, spec.Sigma_e, _arl_h(args, bench),
        trials=args.trials, seed=args.seed, watermark_lag=_lag(args, bench), opts=opts,
    )
    print(f"arl_estimate = {est.mean_run_length!r}")
    print(f"capped_trials = {est.capped_trials} of {est.trials} (cap {est.cap})")
    return 0


def _add_common(parser: argparse.ArgumentParser, sigma_e: bool = True) -> None:
    parser.add_argument("--system", required=True,
                        help="benchmark name (system-a|system-b|system-c) or definition file")
    if sigma_e:
        parser.add_argument("--sigma-e", required=True,
                            help="diag:v1,..,vp | rank1:u1,..,up,lambda | opt:J")
    parser.add_argument("--arl-h", type=float, default=None,
                        help="ARL lower bound; threshold is log(arl-h)")
    parser.add_argument("--lag", type=int, default=None,
                        help="watermark pairing lag k_e (default: system default)")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--zero-threshold", type=float, default=1e-9)
    parser.add_argument("--restarts", type=int, default=16,
                        help="optimizer restarts (opt: specs and optimize)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="replaywm",
        description="Watermarked LQG loops under replay attack: design, "
                    "closed-form detection statistics, and Monte Carlo campaigns.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_design = sub.add_parser("design", help="solve the steady-state LQG/Kalman design")
    _add_common(p_design, sigma_e=False)
    p_design.set_defaults(func=_cmd_design)

    p_kld = sub.add_parser("kld", help="KLD, SADD asymptote, and cost for a watermark")
    _add_common(p_kld)
    p_kld.set_defaults(func=_cmd_kld)

    p_dlqg = sub.add_parser("delta-lqg", help="control-cost increase of a watermark")
    _add_common(p_dlqg)
    p_dlqg.set_defaults(func=_cmd_delta_lqg)

    p_opt = sub.add_parser("optimize", help="rank-one watermark maximizing KLD at a budget")
    _add_common(p_opt, sigma_e=False)
    p_opt.add_argument("--budget", type=float, required=True, help="Delta-LQG cap J")
    p_opt.set_defaults(func=_cmd_optimize)

    p_sweep = sub.add_parser("sweep", help="SADD vs Delta-LQG sweep to CSV")
    _add_common(p_sweep, sigma_e=False)
    p_sweep.add_argument("--grid", default=None, help="comma list of equal-power alphas")
    p_sweep.add_argument("--opt-budgets", default=None, help="comma list of optimizer budgets")
    p_sweep.add_argument("--out", required=True)
    p_sweep.add_argument("--trials", type=int, default=500)
    p_sweep.add_argument("--nu", type=int, default=201)
    p_sweep.add_argument("--k0", type=int, default=200)
    p_sweep.add_argument("--delay-cap", type=int, default=2000)
    p_sweep.set_defaults(func=_cmd_sweep)

    p_sim = sub.add_parser("simulate", help="one watermarked run with the online detector")
    _add_common(p_sim)
    p_sim.add_argument("--horizon", type=int, required=True)
    p_sim.add_argument("--nu", type=int, default=0, help="attack start step (0 = no attack)")
    p_sim.add_argument("--k0", type=int, default=200, help="replay delay")
    p_sim.add_argument("--out", default=None, help="per-step CSV path")
    p_sim.set_defaults(func=_cmd_simulate)

    p_arl = sub.add_parser("arl", help="Monte Carlo average run length to false alarm")
    _add_common(p_arl)
    p_arl.add_argument("--trials", type=int, default=200)
    p_arl.set_defaults(func=_cmd_arl)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ReplaywmError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=_sysmod.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
