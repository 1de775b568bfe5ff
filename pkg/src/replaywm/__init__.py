"""Watermarked LQG control loops under replay attack: closed-loop
design, closed-form detection statistics, an online CUSUM detector, a
rank-one watermark optimizer, and Monte Carlo campaigns.

The per-step simulation loop runs on a compiled extension when it was
built and on a pure-numpy fallback otherwise; ``kernel_name()`` reports
which one is active.
"""

from ._kernel import kernel_name
from .attack import AttackerGMP, ReplayAttack, build_attacker_gmp, ezz
from .detector import CusumDetector, Decision, LlrModel, llr, run_until_alarm
from .experiments import (
    BenchmarkSystem,
    CampaignConfig,
    SweepResult,
    WatermarkGrid,
    benchmark,
    estimate_add,
    estimate_arl,
    sweep_sadd_vs_dlqg,
)
from .linalg import SolverOptions, solve_dare, solve_dlyap, spectral_radius
from .optimize import OptimizerConfig, WatermarkSpec, feasible_scale, optimize_watermark
from .plant import (
    ClosedLoopDesign,
    LoopState,
    StepRecord,
    SystemModel,
    design,
    simulate,
    step_normal,
)
from .stats import (
    DetectionAnalysis,
    SeriesOptions,
    analyze,
    delta_lqg,
    kld,
    kld_delayed,
    relative_degree,
    sadd_theory,
    sigma_gamma_tilde,
)

__version__ = "0.1.0"

__all__ = [
    "AttackerGMP",
    "BenchmarkSystem",
    "CampaignConfig",
    "ClosedLoopDesign",
    "CusumDetector",
    "Decision",
    "DetectionAnalysis",
    "LlrModel",
    "LoopState",
    "OptimizerConfig",
    "ReplayAttack",
    "SeriesOptions",
    "SolverOptions",
    "StepRecord",
    "SweepResult",
    "SystemModel",
    "WatermarkGrid",
    "WatermarkSpec",
    "analyze",
    "benchmark",
    "build_attacker_gmp",
    "delta_lqg",
    "design",
    "estimate_add",
    "estimate_arl",
    "ezz",
    "feasible_scale",
    "kernel_name",
    "kld",
    "kld_delayed",
    "llr",
    "optimize_watermark",
    "relative_degree",
    "run_until_alarm",
    "sadd_theory",
    "sigma_gamma_tilde",
    "simulate",
    "spectral_radius",
    "step_normal",
    "solve_dare",
    "solve_dlyap",
    "sweep_sadd_vs_dlqg",
]
