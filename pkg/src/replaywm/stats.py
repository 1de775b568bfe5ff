"""Closed-form steady-state statistics of the watermarked loop under
replay: the attacked innovation covariance, joint innovation/watermark
covariances, KLD between the pre- and post-attack joints, the control
cost increase, and the detection-delay asymptote.

KLD is always evaluated through the conditional (Schur complement)
factorization of the joint, which stays valid when Sigma_e is rank
deficient; the nonsingular joint-Gaussian formula is provided separately
as a cross-check.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import linalg
from .attack import AttackerGMP
from .errors import DegenerateSystem, NonConvergence, NotPositiveDefinite, ZeroDivergence
from .linalg import DEFAULT_OPTIONS, SolverOptions, as_matrix, symmetrize
from .plant import ClosedLoopDesign, SystemModel

KLD_FLOOR = -1e-12


@dataclass(frozen=True)
class SeriesOptions:
    """Truncation policy for the lagged cross-covariance series."""

    max_terms: int = 100_000
    tail_tolerance: float = 1e-12

    def __post_init__(self):
        if self.max_terms < 1:
            raise ValueError("max_terms must be >= 1")
        if self.tail_tolerance <= 0:
            raise ValueError("tail_tolerance must be positive")


DEFAULT_SERIES = SeriesOptions()


def exz_minus1(
    des: ClosedLoopDesign, gmp: AttackerGMP, opts: SeriesOptions = DEFAULT_SERIES
) -> np.ndarray:
    """Stationary cross-covariance E[xhat^F_{k-1|k-1} z_k^T] under replay.

    Computed as the geometric series

        sum_i Acl^i K E[z_{k-i-1} z_k^T],
        E[z_{k-j} z_k^T] = C_a E_xa(0) (A_a^T)^j C_a^T,

    truncated once the term's infinity norm drops below tail_tolerance.
    """
    n, m = des.K.shape
    total = np.zeros((n, m))
    left = des.K.copy()
    lagged = gmp.Exa0 @ gmp.Aa.T
    for _ in range(opts.max_terms):
        term = left @ (gmp.Ca @ lagged @ gmp.Ca.T)
        total += term
        if np.max(np.abs(term)) < opts.tail_tolerance:
            return total
        left = des.Acl @ left
        lagged = lagged @ gmp.Aa.T
    raise NonConvergence(
        f"cross-covariance series not below {opts.tail_tolerance:.1e} within "
        f"{opts.max_terms} terms"
    )


def sigma_gamma_tilde(
    sys: SystemModel,
    des: ClosedLoopDesign,
    sigma_e: np.ndarray,
    gmp: AttackerGMP,
    opts: SolverOptions = DEFAULT_OPTIONS,
    series: SeriesOptions = DEFAULT_SERIES,
) -> np.ndarray:
    """Innovation covariance under replay.

    E_zz(0) - C(A+BL) E_xz(-1) - [C(A+BL) E_xz(-1)]^T
      + C B Sigma_e B^T C^T
      + C(A+BL)(Sigma_xFz + Sigma_xFe)(A+BL)^T C^T

    where Sigma_xFz and Sigma_xFe solve the two estimator-state Lyapunov
    equations driven by the replayed stream and by the watermark.
    """
    sigma_e = as_matrix(sigma_e, "Sigma_e")
    abl = sys.A + sys.B @ des.L
    ikc = np.eye(sys.n) - des.K @ sys.C
    ezz0 = symmetrize(gmp.Ca @ gmp.Exa0 @ gmp.Ca.T)
    exz = exz_minus1(des, gmp, series)

    rhs_z = des.K @ ezz0 @ des.K.T + des.Acl @ exz @ des.K.T + (des.Acl @ exz @ des.K.T).T
    sigma_xfz = linalg.solve_dlyap(des.Acl, rhs_z, opts)
    rhs_e = ikc @ sys.B @ sigma_e @ sys.B.T @ ikc.T
    sigma_xfe = linalg.solve_dlyap(des.Acl, rhs_e, opts)

    cabl = sys.C @ abl
    result = symmetrize(
        ezz0
        - cabl @ exz
        - (cabl @ exz).T
        + sys.C @ sys.B @ sigma_e @ sys.B.T @ sys.C.T
        + cabl @ (sigma_xfz + sigma_xfe) @ cabl.T
    )
    linalg.cholesky_pd(result, "Sigma_gamma_tilde")
    return result


def innovation_watermark_cross(sys: SystemModel, sigma_e: np.ndarray, lag: int = 1) -> np.ndarray:
    """Post-attack cross-covariance E[gamma~_k e_{k-lag}^T] = -C A^{lag-1} B Sigma_e.

    Valid for systems whose relative degree is at least ``lag``; lag 1 is
    the plain -C B Sigma_e coupling.
    """
    if lag < 1:
        raise ValueError("watermark lag must be >= 1")
    sigma_e = as_matrix(sigma_e, "Sigma_e")
    return -sys.C @ np.linalg.matrix_power(sys.A, lag - 1) @ sys.B @ sigma_e


def kld(
    sigma_gamma: np.ndarray,
    sigma_gamma_tilde_: np.ndarray,
    sigma_e: np.ndarray,
    cross: np.ndarray,
    zero_threshold: float = DEFAULT_OPTIONS.zero_threshold,
) -> float:
    """KLD (nats) between the post- and pre-attack joint distributions of
    (innovation, lagged watermark).

    Evaluated in the conditional form

        1/2 { tr(Sg^-1 Sgt) - m - log |Sgt - cross Se^+ cross^T| / |Sg| }

    which never inverts Sigma_e alone, so rank-deficient watermark
    covariances are handled; values within the numerical floor of zero
    are clamped to 0.
    """
    sg = as_matrix(sigma_gamma, "Sigma_gamma")
    sgt = as_matrix(sigma_gamma_tilde_, "Sigma_gamma_tilde")
    se = as_matrix(sigma_e, "Sigma_e")
    cross = as_matrix(cross, "cross")
    m = sg.shape[0]
    schur = cross @ linalg.psd_pinv(se, zero_threshold) @ cross.T
    cond = symmetrize(sgt - schur)
    value = 0.5 * (
        float(np.trace(linalg.inverse_pd(sg) @ sgt))
        - m
        - (linalg.logdet_pd(cond) - linalg.logdet_pd(sg))
    )
    if KLD_FLOOR <= value < 0.0:
        return 0.0
    return value


def kld_delayed(
    sys: SystemModel,
    sigma_gamma: np.ndarray,
    sigma_gamma_tilde_: np.ndarray,
    sigma_e: np.ndarray,
    k_e: int,
    zero_threshold: float = DEFAULT_OPTIONS.zero_threshold,
) -> float:
    """KLD when the watermark is paired at lag k_e (the relative degree).

    k_e = 1 reduces exactly to ``kld`` with the -C B Sigma_e coupling;
    larger lags use -C A^{k_e - 1} B Sigma_e.
    """
    cross = innovation_watermark_cross(sys, sigma_e, k_e)
    return kld(sigma_gamma, sigma_gamma_tilde_, sigma_e, cross, zero_threshold)


def kld_joint_direct(sigma_pre: np.ndarray, sigma_post: np.ndarray) -> float:
    """Joint-Gaussian KLD 1/2 { tr(pre^-1 post) - d - log |post|/|pre| }.

    Requires both joints to be PD (nonsingular Sigma_e); used as the
    cross-check for the conditional form.
    """
    pre = as_matrix(sigma_pre, "Sigma_pre")
    post = as_matrix(sigma_post, "Sigma_post")
    if pre.shape != post.shape:
        raise linalg.DimensionMismatch("joint covariances must have equal shapes")
    d = pre.shape[0]
    return 0.5 * (
        float(np.trace(linalg.inverse_pd(pre) @ post))
        - d
        - (linalg.logdet_pd(post) - linalg.logdet_pd(pre))
    )


def joint_covariances(
    sigma_gamma: np.ndarray,
    sigma_gamma_tilde_: np.ndarray,
    sigma_e: np.ndarray,
    cross: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """Pre-attack (block diagonal) and post-attack joint covariances of
    (innovation, lagged watermark)."""
    sg = as_matrix(sigma_gamma, "Sigma_gamma")
    sgt = as_matrix(sigma_gamma_tilde_, "Sigma_gamma_tilde")
    se = as_matrix(sigma_e, "Sigma_e")
    cross = as_matrix(cross, "cross")
    m, p = cross.shape
    pre = np.block([[sg, np.zeros((m, p))], [np.zeros((p, m)), se]])
    post = np.block([[sgt, cross], [cross.T, se]])
    return pre, post


def control_cost_matrix(
    sys: SystemModel, des: ClosedLoopDesign, opts: SolverOptions = DEFAULT_OPTIONS
) -> np.ndarray:
    """B^T Sigma_L B + U, the per-unit-watermark control cost.

    Sigma_L solves (A+BL)^T Sigma_L (A+BL) - Sigma_L + L^T U L + W = 0.
    """
    abl = sys.A + sys.B @ des.L
    sigma_l = linalg.solve_dlyap(abl.T, des.L.T @ sys.U @ des.L + sys.W, opts)
    return symmetrize(sys.B.T @ sigma_l @ sys.B + sys.U)


def delta_lqg(
    sys: SystemModel,
    des: ClosedLoopDesign,
    sigma_e: np.ndarray,
    opts: SolverOptions = DEFAULT_OPTIONS,
) -> float:
    """Increase in infinite-horizon LQG cost from the watermark:
    tr[(B^T Sigma_L B + U) Sigma_e]. Linear and monotone in Sigma_e."""
    sigma_e = as_matrix(sigma_e, "Sigma_e")
    return float(np.trace(control_cost_matrix(sys, des, opts) @ sigma_e))


def sadd_theory(
    kld_value: float, arl_h: float, zero_threshold: float = DEFAULT_OPTIONS.zero_threshold
) -> float:
    """Asymptotic worst-case detection delay log(arl_h) / kld, in steps.

    Raises ZeroDivergence when the divergence is below the zero
    threshold (the attack is asymptotically undetectable).
    """
    if arl_h <= 1.0:
        raise ValueError("arl_h must exceed 1")
    if kld_value <= zero_threshold:
        raise ZeroDivergence(f"kld {kld_value:.3e} is at or below {zero_threshold:.1e}")
    return float(np.log(arl_h) / kld_value)


def relative_degree(sys: SystemModel, zero_threshold: float = 1e-6) -> int:
    """Smallest k with ||C A^{k-1} B||_inf above the threshold, up to n.

    Raises DegenerateSystem when the first n Markov parameters all fall
    below the threshold.
    """
    markov = sys.C @ sys.B
    for k in range(1, sys.n + 1):
        if np.max(np.abs(markov)) > zero_threshold:
            return k
        markov = sys.C @ np.linalg.matrix_power(sys.A, k) @ sys.B
    raise DegenerateSystem(
        f"first {sys.n} Markov parameters are below {zero_threshold:.1e}"
    )


@dataclass(frozen=True)
class DetectionAnalysis:
    """Everything the detector and the sweeps need for one
    (system, watermark, lag) triple."""

    sigma_gamma: np.ndarray
    sigma_gamma_tilde: np.ndarray
    cross: np.ndarray
    sigma_joint_pre: np.ndarray
    sigma_joint_post: np.ndarray
    kld: float
    delta_lqg: float
    watermark_lag: int

    def sadd_theory(self, arl_h: float) -> float:
        return sadd_theory(self.kld, arl_h)


def analyze(
    sys: SystemModel,
    des: ClosedLoopDesign,
    sigma_e: np.ndarray,
    watermark_lag: int = 1,
    opts: SolverOptions = DEFAULT_OPTIONS,
    series: SeriesOptions = DEFAULT_SERIES,
) -> DetectionAnalysis:
    """Build the full closed-form analysis for one watermark choice."""
    from .attack import build_attacker_gmp

    sigma_e = as_matrix(sigma_e, "Sigma_e")
    gmp = build_attacker_gmp(sys, des, sigma_e, opts)
    sgt = sigma_gamma_tilde(sys, des, sigma_e, gmp, opts, series)
    cross = innovation_watermark_cross(sys, sigma_e, watermark_lag)
    pre, post = joint_covariances(des.Sigma_gamma, sgt, sigma_e, cross)
    return DetectionAnalysis(
        sigma_gamma=des.Sigma_gamma,
        sigma_gamma_tilde=sgt,
        cross=cross,
        sigma_joint_pre=pre,
        sigma_joint_post=post,
        kld=kld(des.Sigma_gamma, sgt, sigma_e, cross, opts.zero_threshold),
        delta_lqg=delta_lqg(sys, des, sigma_e, opts),
        watermark_lag=watermark_lag,
    )
