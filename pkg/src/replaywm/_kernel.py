"""Loop-kernel selection and the array-level driver shared by the
simulator, the detector campaigns, and the benchmarks.

The compiled extension (``_speedups``) is used when it was built;
otherwise the pure-numpy twin (``_purepy``) is selected. Set
``REPLAYWM_PURE_PYTHON=1`` to force the fallback, e.g. for the kernel
benchmark or parity debugging.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _purepy
from .detector import LlrModel
from .plant import ClosedLoopDesign, SystemModel

try:
    from . import _speedups
except ImportError:  # extension not built; fall back to pure numpy
    _speedups = None


def _force_pure() -> bool:
    return os.environ.get("REPLAYWM_PURE_PYTHON", "") not in ("", "0")


def available_impls() -> dict:
    impls = {"purepy": _purepy}
    if _speedups is not None:
        impls["cython"] = _speedups
    return impls


def active_impl():
    if _speedups is not None and not _force_pure():
        return _speedups
    return _purepy


def kernel_name() -> str:
    return active_impl().KERNEL_NAME


@dataclass(frozen=True)
class SimResult:
    """Raw trajectories for one run, trimmed to the executed steps.

    alarm_pre is the first alarm step before the attack start (0 if
    none), alarm_post the first alarm at or after it (0 if none; for
    no-attack runs, the first alarm overall).
    """

    x: np.ndarray
    xhat: np.ndarray
    y_true: np.ndarray
    y_delivered: np.ndarray
    gamma: np.ndarray
    e: np.ndarray
    u: np.ndarray
    g: np.ndarray
    attacked: np.ndarray
    alarm_pre: int
    alarm_post: int
    steps: int


def _c_contig(arr: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(arr, dtype=float)


def run_loop(
    sys: SystemModel,
    des: ClosedLoopDesign,
    w: np.ndarray,
    v: np.ndarray,
    e: np.ndarray,
    burn_in: int,
    nu: int = 0,
    k0: int = 0,
    model: Optional[LlrModel] = None,
    threshold: float = np.inf,
    watermark_lag: int = 1,
    reset_at_nu: bool = False,
    stop_at_alarm: bool = False,
    impl=None,
) -> SimResult:
    """Run burn-in plus main loop over the pre-drawn noise arrays.

    ``nu`` = 0 disables the attack. Passing an LlrModel enables the
    in-loop CUSUM recursion; with ``stop_at_alarm`` the run ends at the
    first alarm eligible for the configured mode (any step for
    no-attack runs, at-or-after nu otherwise).
    """
    if impl is None:
        impl = active_impl()
    n, m, p = sys.n, sys.m, sys.p
    total = w.shape[0]
    steps = total - burn_in
    if steps < 1:
        raise ValueError("noise arrays must cover burn_in plus at least one step")
    if w.shape != (total, n) or v.shape != (total, m) or e.shape != (total, p):
        raise ValueError("noise array shapes do not match the model dimensions")
    if nu > 0 and not (1 <= k0 < nu):
        raise ValueError("attack requires 1 <= k0 < nu")

    det_on = model is not None
    if det_on:
        p0 = _c_contig(model.precision_pre)
        p1 = _c_contig(model.precision_cond)
        mmap = _c_contig(model.cond_mean_map)
        logdet_term = model.logdet_term
    else:
        p0 = np.zeros((m, m))
        p1 = np.zeros((m, m))
        mmap = np.zeros((m, p))
        logdet_term = 0.0

    x_out = np.empty((steps, n))
    xhat_out = np.empty((steps, n))
    y_true = np.empty((steps, m))
    y_del = np.empty((steps, m))
    gamma_out = np.empty((steps, m))
    u_out = np.empty((steps, p))
    g_out = np.zeros(steps)
    attacked_out = np.zeros(steps, dtype=np.uint8)

    alarm_pre, alarm_post, steps_done = impl.run_loop_impl(
        _c_contig(sys.A), _c_contig(sys.B), _c_contig(sys.C),
        _c_contig(des.K), _c_contig(des.L),
        _c_contig(w), _c_contig(v), _c_contig(e),
        int(burn_in), int(nu), int(k0),
        int(det_on), p0, p1, mmap, float(logdet_term),
        int(watermark_lag), float(threshold),
        int(reset_at_nu), int(stop_at_alarm),
        x_out, xhat_out, y_true, y_del, gamma_out, u_out, g_out, attacked_out,
    )
    sl = slice(0, steps_done)
    return SimResult(
        x=x_out[sl],
        xhat=xhat_out[sl],
        y_true=y_true[sl],
        y_delivered=y_del[sl],
        gamma=gamma_out[sl],
        e=e[burn_in:burn_in + steps_done],
        u=u_out[sl],
        g=g_out[sl],
        attacked=attacked_out[sl],
        alarm_pre=int(alarm_pre),
        alarm_post=int(alarm_post),
        steps=int(steps_done),
    )
