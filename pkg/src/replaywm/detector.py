"""Online CUSUM detector over the joint (innovation, lagged watermark)
stream.

The log-likelihood ratio between the post-attack and pre-attack joint
Gaussians is evaluated through the conditional factorization: both
joints share the watermark marginal, so

    llr(gamma, e) = 1/2 [ gamma^T P0 gamma - r^T P1 r + c ],
    r = gamma - M e,   M = cross Sigma_e^+,
    P0 = Sigma_gamma^-1,   P1 = (Sigma_gamma_tilde - cross Sigma_e^+ cross^T)^-1,
    c = log |Sigma_gamma| - log |Sigma_gamma_tilde - cross Sigma_e^+ cross^T|.

This stays well defined for rank-one Sigma_e. The CUSUM statistic is
g_k = max(0, g_{k-1} + llr_k) with alarm at g_k >= log(arl_h).
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Iterator

import numpy as np

from . import linalg
from .errors import StreamExhausted
from .linalg import DEFAULT_OPTIONS, as_matrix, symmetrize
from .stats import DetectionAnalysis


@dataclass(frozen=True)
class LlrModel:
    """Precomputed pre/post joint Gaussian pair in conditional form."""

    precision_pre: np.ndarray   # Sigma_gamma^-1, m x m
    precision_cond: np.ndarray  # conditional post precision, m x m
    cond_mean_map: np.ndarray   # M = cross Sigma_e^+, m x p
    logdet_term: float          # log |Sigma_gamma| - log |Sigma_cond|
    m: int
    p: int

    @classmethod
    def build(
        cls,
        sigma_gamma: np.ndarray,
        sigma_gamma_tilde: np.ndarray,
        sigma_e: np.ndarray,
        cross: np.ndarray,
        zero_threshold: float = DEFAULT_OPTIONS.zero_threshold,
    ) -> "LlrModel":
        sg = as_matrix(sigma_gamma, "Sigma_gamma")
        sgt = as_matrix(sigma_gamma_tilde, "Sigma_gamma_tilde")
        se = as_matrix(sigma_e, "Sigma_e")
        cross = as_matrix(cross, "cross")
        m, p = cross.shape
        se_pinv = linalg.psd_pinv(se, zero_threshold)
        mean_map = cross @ se_pinv
        cond = symmetrize(sgt - cross @ se_pinv @ cross.T)
        return cls(
            precision_pre=linalg.inverse_pd(sg),
            precision_cond=linalg.inverse_pd(cond),
            cond_mean_map=mean_map,
            logdet_term=linalg.logdet_pd(sg) - linalg.logdet_pd(cond),
            m=m,
            p=p,
        )

    @classmethod
    def from_analysis(cls, analysis: DetectionAnalysis,
                      zero_threshold: float = DEFAULT_OPTIONS.zero_threshold) -> "LlrModel":
        sigma_e = analysis.sigma_joint_post[analysis.sigma_gamma.shape[0]:,
                                            analysis.sigma_gamma.shape[0]:]
        return cls.build(
            analysis.sigma_gamma,
            analysis.sigma_gamma_tilde,
            sigma_e,
            analysis.cross,
            zero_threshold,
        )


def llr(model: LlrModel, gamma: np.ndarray, e_lagged: np.ndarray) -> float:
    """Log-likelihood ratio log f_post / f_pre at one joint sample."""
    gamma = np.asarray(gamma, dtype=float).reshape(model.m)
    e_lagged = np.asarray(e_lagged, dtype=float).reshape(model.p)
    residual = gamma - model.cond_mean_map @ e_lagged
    return 0.5 * (
        gamma @ model.precision_pre @ gamma
        - residual @ model.precision_cond @ residual
        + model.logdet_term
    )


def cusum_update(g: float, llr_value: float) -> float:
    """One CUSUM step: max(0, g + llr)."""
    return max(0.0, g + llr_value)


@dataclass(frozen=True)
class Decision:
    """Outcome of one detector update."""

    alarm: bool
    g: float
    k: int


@dataclass
class CusumDetector:
    """Sequential detector state.

    Pairs each innovation with the watermark drawn ``watermark_lag``
    steps earlier; the contribution is zero while the lag buffer fills
    (warm-up), so the statistic cannot alarm before real evidence
    arrives. The threshold is log(arl_h).
    """

    model: LlrModel
    threshold: float
    watermark_lag: int = 1
    g: float = 0.0
    k: int = 0
    _lag_buffer: deque = field(default_factory=deque, repr=False)

    @classmethod
    def for_arl(cls, model: LlrModel, arl_h: float, watermark_lag: int = 1) -> "CusumDetector":
        if arl_h <= 1.0:
            raise ValueError("arl_h must exceed 1")
        return cls(model=model, threshold=float(np.log(arl_h)), watermark_lag=watermark_lag)

    def update(self, gamma: np.ndarray, e_current: np.ndarray) -> Decision:
        """Consume one (innovation, current watermark) pair."""
        self.k += 1
        self._lag_buffer.append(np.asarray(e_current, dtype=float))
        if len(self._lag_buffer) > self.watermark_lag:
            e_lagged = self._lag_buffer.popleft()
            value = llr(self.model, gamma, e_lagged)
        else:
            value = 0.0
        self.g = cusum_update(self.g, value)
        return Decision(alarm=self.g >= self.threshold, g=self.g, k=self.k)

    def reset_statistic(self) -> None:
        """Zero the statistic without touching the lag buffer."""
        self.g = 0.0


def run_until_alarm(
    stream: Iterable[tuple[np.ndarray, np.ndarray]], det: CusumDetector
) -> int:
    """Consume (gamma, e) pairs until the detector alarms; returns the
    stopping index. Raises StreamExhausted if the stream ends first."""
    for gamma, e_current in stream:
        decision = det.update(gamma, e_current)
        if decision.alarm:
            return decision.k
    raise StreamExhausted(f"no alarm after {det.k} records")
