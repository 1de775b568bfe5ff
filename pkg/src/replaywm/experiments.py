"""Benchmark systems and the Monte Carlo campaigns behind the
SADD-vs-cost sweeps.

Detection delays are estimated at the CUSUM worst case: the statistic is
reset to zero when the attack starts, and the delay counts the attacked
innovations consumed up to the alarm. Trials that alarm before the
attack are false alarms; they are reported and excluded from the delay
mean. All campaigns derive per-trial seeds from one root seed, so runs
are reproducible and pairable across configurations.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import _kernel, stats
from .attack import ReplayAttack
from .detector import LlrModel
from .errors import AllFalseAlarms
from .linalg import DEFAULT_OPTIONS, SolverOptions
from .optimize import OptimizerConfig, WatermarkSpec, optimize_watermark
from .plant import DEFAULT_BURN_IN, ClosedLoopDesign, SystemModel, design, draw_noise


@dataclass(frozen=True)
class BenchmarkSystem:
    """A named built-in configuration: plant plus campaign defaults."""

    name: str
    model: SystemModel
    arl_h: float
    default_watermark_lag: int


def _system_a_model() -> SystemModel:
    return SystemModel(
        A=[[0.75, 0.2], [0.2, 1.0]],
        B=[[0.9, 0.5], [0.1, 1.2]],
        C=[[1.0, -1.0]],
        Q=np.eye(2),
        R=[[1.0]],
        W=np.diag([1.0, 2.0]),
        U=np.diag([0.4, 0.7]),
    )


def _system_b_model() -> SystemModel:
    return SystemModel(
        A=[
            [0.9683, 0.0, 0.0819, 0.0],
            [0.0, 0.9780, 0.0, 0.06377],
            [0.0, 0.0, 0.9167, 0.0],
            [0.0, 0.0, 0.0, 0.9355],
        ],
        B=[[0.1638, 0.004], [0.002, 0.1242], [0.0, 0.0917], [0.0604, 0.0]],
        C=[[5.0, 0.0, 0.0, 0.0], [0.0, 5.0, 0.0, 0.0]],
        Q=0.25 * np.eye(4),
        R=0.5 * np.eye(2),
        W=np.diag([5.0, 5.0, 1.0, 1.0]),
        U=np.diag([2.0, 2.0]),
    )


def _system_c_model() -> SystemModel:
    base = _system_a_model()
    return SystemModel(
        A=base.A,
        B=[[0.9, 0.5], [1.3, 0.72]],
        C=[[1.3, -0.9]],
        Q=base.Q,
        R=base.R,
        W=base.W,
        U=base.U,
    )


_BUILDERS = {
    "system-a": lambda: BenchmarkSystem("system-a", _system_a_model(), 1000.0, 1),
    "system-b": lambda: BenchmarkSystem("system-b", _system_b_model(), 1000.0, 1),
    "system-c": lambda: BenchmarkSystem("system-c", _system_c_model(), 100.0, 2),
}

BENCHMARK_NAMES = tuple(sorted(_BUILDERS))


def benchmark(name: str) -> BenchmarkSystem:
    """Return one of the built-in systems by name."""
    try:
        return _BUILDERS[name]()
    except KeyError:
        raise KeyError(f"unknown benchmark {name!r}; choose from {BENCHMARK_NAMES}") from None


@dataclass(frozen=True)
class CampaignConfig:
    """Monte Carlo campaign parameters.

    delay_cap bounds the post-attack steps simulated per delay trial
    (censored trials count at the cap and are reported); arl_cap_factor
    bounds run-length trials at arl_cap_factor * arl_h steps.
    """

    trials: int = 500
    arl_trials: int = 200
    nu: int = 201
    k0: int = 200
    delay_cap: int = 2000
    arl_cap_factor: int = 50
    burn_in: int = DEFAULT_BURN_IN
    seed: int = 0

    def __post_init__(self):
        if self.trials < 1 or self.arl_trials < 1:
            raise ValueError("trial counts must be >= 1")
        if not (1 <= self.k0 < self.nu):
            raise ValueError("campaign requires 1 <= k0 < nu")
        if self.delay_cap < 1:
            raise ValueError("delay_cap must be >= 1")


@dataclass(frozen=True)
class AddEstimate:
    mean_delay: float
    ci_halfwidth: float
    false_alarm_trials: int
    used_trials: int
    censored_trials: int


@dataclass(frozen=True)
class ArlEstimate:
    mean_run_length: float
    capped_trials: int
    trials: int
    cap: int


def _trial_seeds(seed: int, count: int) -> list[np.random.SeedSequence]:
    return np.random.SeedSequence(seed).spawn(count)


def estimate_add(
    sys: SystemModel,
    des: ClosedLoopDesign,
    sigma_e: np.ndarray,
    arl_h: float,
    trials: int,
    seed: int,
    watermark_lag: int = 1,
    nu: int = 201,
    k0: int = 200,
    delay_cap: int = 2000,
    burn_in: int = DEFAULT_BURN_IN,
    opts: SolverOptions = DEFAULT_OPTIONS,
) -> AddEstimate:
    """Worst-case average detection delay under replay.

    Each trial runs the loop with the attack at nu, resets the CUSUM
    statistic when the attack starts, and records the number of attacked
    innovations consumed until the alarm. Raises AllFalseAlarms when
    every trial alarms pre-attack.
    """
    ReplayAttack(nu=nu, k0=k0)
    analysis = stats.analyze(sys, des, sigma_e, watermark_lag, opts)
    model = LlrModel.from_analysis(analysis, opts.zero_threshold)
    threshold = float(np.log(arl_h))
    steps = nu + delay_cap

    delays = []
    false_alarms = 0
    censored = 0
    for child in _trial_seeds(seed, trials):
        w, v, e = draw_noise(sys, sigma_e, burn_in + steps, child, opts.zero_threshold)
        out = _kernel.run_loop(
            sys=sys, des=des, w=w, v=v, e=e, burn_in=burn_in, nu=nu, k0=k0,
            model=model, threshold=threshold, watermark_lag=watermark_lag,
            reset_at_nu=True, stop_at_alarm=True,
        )
        if out.alarm_pre > 0:
            false_alarms += 1
        elif out.alarm_post > 0:
            delays.append(out.alarm_post - nu + 1)
        else:
            censored += 1
            delays.append(delay_cap)
    if not delays:
        raise AllFalseAlarms(f"all {trials} trials alarmed before the attack at nu={nu}")
    arr = np.asarray(delays, dtype=float)
    halfwidth = 1.96 * float(arr.std(ddof=1)) / np.sqrt(arr.size) if arr.size > 1 else 0.0
    return AddEstimate(
        mean_delay=float(arr.mean()),
        ci_halfwidth=halfwidth,
        false_alarm_trials=false_alarms,
        used_trials=arr.size,
        censored_trials=censored,
    )


def estimate_arl(
    sys: SystemModel,
    des: ClosedLoopDesign,
    sigma_e: np.ndarray,
    arl_h: float,
    trials: int,
    seed: int,
    watermark_lag: int = 1,
    cap_factor: int = 50,
    burn_in: int = DEFAULT_BURN_IN,
    opts: SolverOptions = DEFAULT_OPTIONS,
    model: Optional[LlrModel] = None,
) -> ArlEstimate:
    """Mean run length to false alarm on attack-free streams, capped at
    cap_factor * arl_h steps per trial (capped trials count at the cap)."""
    if model is None:
        analysis = stats.analyze(sys, des, sigma_e, watermark_lag, opts)
        model = LlrModel.from_analysis(analysis, opts.zero_threshold)
    threshold = float(np.log(arl_h))
    cap = int(cap_factor * arl_h)

    lengths = []
    capped = 0
    for child in _trial_seeds(seed, trials):
        w, v, e = draw_noise(sys, sigma_e, burn_in + cap, child, opts.zero_threshold)
        out = _kernel.run_loop(
            sys=sys, des=des, w=w, v=v, e=e, burn_in=burn_in, nu=0, k0=0,
            model=model, threshold=threshold, watermark_lag=watermark_lag,
            stop_at_alarm=True,
        )
        if out.alarm_post > 0:
            lengths.append(out.alarm_post)
        else:
            capped += 1
            lengths.append(cap)
    return ArlEstimate(
        mean_run_length=float(np.mean(lengths)),
        capped_trials=capped,
        trials=trials,
        cap=cap,
    )


@dataclass(frozen=True)
class SweepRow:
    delta_lqg: float
    sigma_e_kind: str
    sigma_e_params: str
    kld_nats: float
    sadd_theory: float
    add_empirical: float
    add_ci: float
    false_alarm_trials: int
    trials: int
    seed: int


@dataclass(frozen=True)
class SweepResult:
    rows: tuple[SweepRow, ...]

    def __iter__(self):
        return iter(self.rows)

    def __len__(self):
        return len(self.rows)


def _format_params(values) -> str:
    return ";".join(repr(float(x)) for x in np.asarray(values, dtype=float).ravel())


@dataclass(frozen=True)
class WatermarkGrid:
    """Either equal-power diagonal scales or optimizer budgets."""

    kind: str                       # "diag" or "optimized"
    values: tuple[float, ...]       # alphas for diag, budgets for optimized

    def __post_init__(self):
        if self.kind not in ("diag", "optimized"):
            raise ValueError("grid kind must be 'diag' or 'optimized'")
        if not self.values:
            raise ValueError("grid must be nonempty")


def sweep_sadd_vs_dlqg(
    bench: BenchmarkSystem,
    grid: WatermarkGrid,
    campaign: CampaignConfig,
    watermark_lag: Optional[int] = None,
    opts: SolverOptions = DEFAULT_OPTIONS,
    optimizer_cfg: Optional[OptimizerConfig] = None,
) -> SweepResult:
    """One theoretical + empirical row per grid point, sorted by cost.

    Every grid point reuses the same root seed, so rows are pairable
    across grids and lags; the whole sweep is deterministic for a fixed
    campaign config.
    """
    lag = bench.default_watermark_lag if watermark_lag is None else watermark_lag
    sys = bench.model
    des = design(sys, opts)
    rows = []
    for value in grid.values:
        if grid.kind == "diag":
            spec = WatermarkSpec.diagonal(np.full(sys.p, float(value)))
            params = _format_params(np.diag(spec.Sigma_e))
        else:
            cfg = optimizer_cfg if optimizer_cfg is not None else OptimizerConfig(seed=campaign.seed)
            spec, _ = optimize_watermark(sys, des, float(value), cfg, lag, opts)
            params = _format_params(spec.vector)
        analysis = stats.analyze(sys, des, spec.Sigma_e, lag, opts)
        add = estimate_add(
            sys, des, spec.Sigma_e, bench.arl_h,
            trials=campaign.trials, seed=campaign.seed, watermark_lag=lag,
            nu=campaign.nu, k0=campaign.k0, delay_cap=campaign.delay_cap,
            burn_in=campaign.burn_in, opts=opts,
        )
        rows.append(
            SweepRow(
                delta_lqg=analysis.delta_lqg,
                sigma_e_kind=spec.kind,
                sigma_e_params=params,
                kld_nats=analysis.kld,
                sadd_theory=analysis.sadd_theory(bench.arl_h),
                add_empirical=add.mean_delay,
                add_ci=add.ci_halfwidth,
                false_alarm_trials=add.false_alarm_trials,
                trials=campaign.trials,
                seed=campaign.seed,
            )
        )
    rows.sort(key=lambda row: row.delta_lqg)
    return SweepResult(rows=tuple(rows))
