"""Replay attacker: record-and-replay simulation plus the stationary
Gauss-Markov model of the replayed observation stream used by the
closed-form analysis.

The replayed stream z_k = y_{k-k0} is modeled as the output of

    x_{a,k} = A_a x_{a,k-1} + w_{a,k-1},   z_k = C_a x_{a,k}

with hidden state x_a = (x, xhat_pred, v) of dimension 2n + m, driven by
the stationary watermarked closed loop. The identity block in C_a is
m x m (it multiplies the observation noise).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import linalg
from .errors import InvalidAttackWindow, UnstableMatrix
from .linalg import DEFAULT_OPTIONS, SolverOptions, as_matrix
from .plant import ClosedLoopDesign, LoopState, StepRecord, SystemModel


@dataclass(frozen=True)
class ReplayAttack:
    """Replay configuration: attack start time nu, replay delay k0.

    Requires k0 >= 1 and nu > k0 so the replay buffer never underflows.
    """

    nu: int
    k0: int

    def __post_init__(self):
        if self.k0 < 1:
            raise InvalidAttackWindow(f"replay delay k0 must be >= 1, got {self.k0}")
        if self.nu <= self.k0:
            raise InvalidAttackWindow(
                f"attack start nu={self.nu} must exceed replay delay k0={self.k0}"
            )

    def validate_window(self, horizon: int) -> None:
        if self.nu > horizon:
            raise InvalidAttackWindow(
                f"attack start nu={self.nu} is beyond the horizon {horizon}"
            )


@dataclass(frozen=True)
class AttackerGMP:
    """Stationary partially observed Gauss-Markov process of the replayed
    stream: state matrix Aa, output map Ca, noise covariance Qa, and the
    stationary state covariance Exa0 solving Exa0 = Aa Exa0 Aa^T + Qa."""

    Aa: np.ndarray
    Ca: np.ndarray
    Qa: np.ndarray
    Exa0: np.ndarray

    @property
    def n_a(self) -> int:
        return self.Aa.shape[0]


def build_attacker_gmp(
    sys: SystemModel,
    des: ClosedLoopDesign,
    sigma_e: np.ndarray,
    opts: SolverOptions = DEFAULT_OPTIONS,
) -> AttackerGMP:
    """Assemble (Aa, Ca, Qa) from the watermarked closed loop and solve the
    stationary covariance Lyapunov equation.

    Raises UnstableMatrix if Aa is not strictly stable (a bounded replay
    requires a stable recorded process).
    """
    sigma_e = as_matrix(sigma_e, "Sigma_e")
    n, m, p = sys.n, sys.m, sys.p
    if sigma_e.shape != (p, p):
        raise linalg.DimensionMismatch(f"Sigma_e must be {p}x{p}, got {sigma_e.shape}")
    a, b, c = sys.A, sys.B, sys.C
    bl = b @ des.L
    abl = a + bl
    kc = des.K @ c
    ikc = np.eye(n) - kc
    bseb = b @ sigma_e @ b.T

    aa = np.block(
        [
            [a + bl @ kc, bl @ ikc, bl @ des.K],
            [abl @ kc, abl @ ikc, abl @ des.K],
            [np.zeros((m, n)), np.zeros((m, n)), np.zeros((m, m))],
        ]
    )
    ca = np.block([[c, np.zeros((m, n)), np.eye(m)]])
    qa = np.block(
        [
            [bseb + sys.Q, bseb, np.zeros((n, m))],
            [bseb, bseb, np.zeros((n, m))],
            [np.zeros((m, n)), np.zeros((m, n)), sys.R],
        ]
    )
    rho = linalg.spectral_radius(aa)
    if rho >= 1.0 - linalg.STABILITY_MARGIN:
        raise UnstableMatrix(f"attacker state matrix has spectral radius {rho:.6f}")
    exa0 = linalg.solve_dlyap(aa, qa, opts)
    return AttackerGMP(Aa=aa, Ca=ca, Qa=qa, Exa0=exa0)


def ezz(gmp: AttackerGMP, lag: int) -> np.ndarray:
    """Lagged covariance of the replayed observations,
    E[z_k z_{k-lag}^T] = C_a A_a^lag E_xa(0) C_a^T; lag 0 is the
    stationary observation covariance."""
    if lag < 0:
        raise ValueError("lag must be >= 0")
    return gmp.Ca @ np.linalg.matrix_power(gmp.Aa, lag) @ gmp.Exa0 @ gmp.Ca.T


def step_replay(
    state: LoopState,
    des: ClosedLoopDesign,
    sys: SystemModel,
    w: np.ndarray,
    v: np.ndarray,
    e: np.ndarray,
    y_replayed: np.ndarray,
) -> tuple[LoopState, StepRecord, np.ndarray]:
    """Advance one step with a replayed observation delivered to the filter.

    The true plant keeps evolving under the (stale-data) control input.
    Returns the new state, the step record carrying the delivered
    observation, and the true observation for the recording buffer.
    """
    k = state.k + 1
    xpred = sys.A @ state.xhat + sys.B @ state.u_prev
    y_true = sys.C @ state.x + v
    gamma = y_replayed - sys.C @ xpred
    xhat = xpred + des.K @ gamma
    u = des.L @ xhat + e
    x_next = sys.A @ state.x + sys.B @ u + w
    new_state = LoopState(x=x_next, xhat=xhat, u_prev=u, k=k, rng_seed=state.rng_seed)
    record = StepRecord(k=k, y=y_replayed, gamma=gamma, e=e, u=u, attacked=True)
    return new_state, record, y_true


def mixing_k0(gmp: AttackerGMP, tol: float = 1e-6) -> int:
    """Replay delay past which the recorded and live streams decorrelate:
    ceil(ln(tol) / ln(rho(Aa)))."""
    rho = linalg.spectral_radius(gmp.Aa)
    if rho <= 0.0:
        return 1
    return max(1, int(np.ceil(np.log(tol) / np.log(rho))))
