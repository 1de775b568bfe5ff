"""LTI plant model, steady-state LQG/Kalman design, and the watermarked
closed-loop simulator.

The loop implements, per step k:

    x_{k+1} = A x_k + B u_k + w_k          w ~ N(0, Q)
    y_k     = C x_k + v_k                  v ~ N(0, R)
    gamma_k = y_k - C xhat_{k|k-1}
    xhat_{k|k} = xhat_{k|k-1} + K gamma_k
    u_k     = L xhat_{k|k} + e_k           e ~ N(0, Sigma_e)

with fixed steady-state gains K and L. Batch simulation is delegated to
the active loop kernel (compiled extension when built, pure-numpy
fallback otherwise); ``step_normal`` is the single-step reference the
kernels are checked against.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Optional

import numpy as np

from . import linalg
from .errors import DimensionMismatch, UnstableClosedLoop
from .linalg import DEFAULT_OPTIONS, SolverOptions, as_matrix, symmetrize

if TYPE_CHECKING:
    from .attack import ReplayAttack

DEFAULT_BURN_IN = 1000


@dataclass(frozen=True)
class SystemModel:
    """The LTI plant (A, B, C, Q, R) plus LQG weights (W, U).

    Q must be PSD, R PD, and W, U positive definite diagonal. All other
    design quantities are derived from this object.
    """

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    Q: np.ndarray
    R: np.ndarray
    W: np.ndarray
    U: np.ndarray

    def __post_init__(self):
        for name in ("A", "B", "C", "Q", "R", "W", "U"):
            object.__setattr__(self, name, as_matrix(getattr(self, name), name))
        n = self.A.shape[0]
        linalg.require_square(self.A, "A")
        if self.B.shape[0] != n:
            raise DimensionMismatch(f"B must have {n} rows, got {self.B.shape}")
        if self.C.shape[1] != n:
            raise DimensionMismatch(f"C must have {n} columns, got {self.C.shape}")
        p, m = self.B.shape[1], self.C.shape[0]
        for name, size in (("Q", n), ("R", m), ("W", n), ("U", p)):
            mat = getattr(self, name)
            linalg.require_square(mat, name)
            if mat.shape[0] != size:
                raise DimensionMismatch(f"{name} must be {size}x{size}, got {mat.shape}")
        linalg.psd_sqrt(self.Q)
        linalg.cholesky_pd(self.R, "R")
        for name in ("W", "U"):
            mat = getattr(self, name)
            if np.any(mat != np.diag(np.diag(mat))):
                raise ValueError(f"{name} must be diagonal")
            if np.any(np.diag(mat) <= 0):
                raise ValueError(f"{name} must be positive definite")

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.C.shape[0]

    @property
    def p(self) -> int:
        return self.B.shape[1]


@dataclass(frozen=True)
class ClosedLoopDesign:
    """Steady-state quantities derived from a SystemModel.

    P        prediction error covariance (filter Riccati solution)
    K        Kalman gain
    S        control Riccati solution
    L        LQG feedback gain
    Sigma_gamma  innovation covariance C P C^T + R
    Acl      (I - K C)(A + B L), strictly stable
    """

    P: np.ndarray
    K: np.ndarray
    S: np.ndarray
    L: np.ndarray
    Sigma_gamma: np.ndarray
    Acl: np.ndarray


def design(sys: SystemModel, opts: SolverOptions = DEFAULT_OPTIONS) -> ClosedLoopDesign:
    """Solve both Riccati equations and assemble the steady-state loop.

    Raises UnstableClosedLoop if (I - K C)(A + B L) is not strictly
    stable; solver failures (undetectable or unstabilizable models)
    propagate as NonConvergence.
    """
    p_cov = linalg.solve_dare(sys.A, sys.C, sys.Q, sys.R, opts)
    sigma_gamma = symmetrize(sys.C @ p_cov @ sys.C.T + sys.R)
    gain_k = p_cov @ sys.C.T @ linalg.inverse_pd(sigma_gamma)
    s_cost = linalg.solve_dare(sys.A.T, sys.B.T, sys.W, sys.U, opts)
    gain_l = -linalg.inverse_pd(sys.B.T @ s_cost @ sys.B + sys.U) @ sys.B.T @ s_cost @ sys.A
    acl = (np.eye(sys.n) - gain_k @ sys.C) @ (sys.A + sys.B @ gain_l)
    if linalg.spectral_radius(acl) >= 1.0 - linalg.STABILITY_MARGIN:
        raise UnstableClosedLoop("closed-loop matrix (I-KC)(A+BL) is not strictly stable")
    return ClosedLoopDesign(
        P=p_cov, K=gain_k, S=s_cost, L=gain_l, Sigma_gamma=sigma_gamma, Acl=acl
    )


@dataclass
class LoopState:
    """Mutable per-run simulation state.

    x is the true state at the current time, xhat the last filtered
    estimate, u_prev the input applied at the previous step (needed to
    form the one-step prediction), k the index of the last completed step.
    """

    x: np.ndarray
    xhat: np.ndarray
    u_prev: np.ndarray
    k: int = 0
    rng_seed: int = 0


@dataclass(frozen=True)
class StepRecord:
    """One simulated step: delivered observation, innovation, watermark,
    applied input, and whether the delivery was replayed."""

    k: int
    y: np.ndarray
    gamma: np.ndarray
    e: np.ndarray
    u: np.ndarray
    attacked: bool = False


def initial_state(sys: SystemModel, rng_seed: int = 0) -> LoopState:
    return LoopState(
        x=np.zeros(sys.n), xhat=np.zeros(sys.n), u_prev=np.zeros(sys.p), k=0, rng_seed=rng_seed
    )


def step_normal(
    state: LoopState,
    des: ClosedLoopDesign,
    sys: SystemModel,
    w: np.ndarray,
    v: np.ndarray,
    e: np.ndarray,
) -> tuple[LoopState, StepRecord]:
    """Advance one step with the true observation delivered to the filter.

    The noise vectors are explicit so runs can be paired and replayed;
    use ``noise_streams`` / ``draw_noise`` to generate them.
    """
    k = state.k + 1
    xpred = sys.A @ state.xhat + sys.B @ state.u_prev
    y = sys.C @ state.x + v
    gamma = y - sys.C @ xpred
    xhat = xpred + des.K @ gamma
    u = des.L @ xhat + e
    x_next = sys.A @ state.x + sys.B @ u + w
    new_state = LoopState(x=x_next, xhat=xhat, u_prev=u, k=k, rng_seed=state.rng_seed)
    return new_state, StepRecord(k=k, y=y, gamma=gamma, e=e, u=u, attacked=False)


def noise_streams(seed) -> dict[str, np.random.Generator]:
    """Named counter-based generators, one per noise source.

    Streams are spawned deterministically from the seed in the fixed
    order (w, v, e), so attack and no-attack runs with the same seed see
    identical noise.
    """
    root = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    names = ("w", "v", "e")
    return {
        name: np.random.Generator(np.random.Philox(child))
        for name, child in zip(names, root.spawn(len(names)))
    }


def draw_noise(
    sys: SystemModel,
    sigma_e: np.ndarray,
    steps: int,
    seed,
    zero_threshold: float = DEFAULT_OPTIONS.zero_threshold,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Pre-draw (w, v, e) arrays of shape (steps, n/m/p) for one run."""
    streams = noise_streams(seed)
    sqrt_q = linalg.psd_sqrt(sys.Q, zero_threshold)
    sqrt_r = linalg.psd_sqrt(sys.R, zero_threshold)
    sqrt_e = linalg.psd_sqrt(as_matrix(sigma_e, "Sigma_e"), zero_threshold)
    w = streams["w"].standard_normal((steps, sys.n)) @ sqrt_q.T
    v = streams["v"].standard_normal((steps, sys.m)) @ sqrt_r.T
    e = streams["e"].standard_normal((steps, sys.p)) @ sqrt_e.T
    return w, v, e


def simulate_arrays(
    sys: SystemModel,
    des: ClosedLoopDesign,
    sigma_e: np.ndarray,
    horizon: int,
    seed,
    attack: Optional["ReplayAttack"] = None,
    burn_in: int = DEFAULT_BURN_IN,
    opts: SolverOptions = DEFAULT_OPTIONS,
):
    """Run the loop kernel for ``horizon`` steps and return raw arrays.

    A ``burn_in`` prefix with the same noise streams brings the loop to
    its stationary regime before step k = 1. Returns the kernel result
    object (true/delivered observations, innovations, watermarks,
    inputs, states, attack flags).
    """
    from . import _kernel

    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    sigma_e = as_matrix(sigma_e, "Sigma_e")
    if attack is not None:
        attack.validate_window(horizon)
    w, v, e = draw_noise(sys, sigma_e, burn_in + horizon, seed, opts.zero_threshold)
    nu = attack.nu if attack is not None else 0
    k0 = attack.k0 if attack is not None else 0
    return _kernel.run_loop(
        sys=sys, des=des, w=w, v=v, e=e, burn_in=burn_in, nu=nu, k0=k0
    )


def simulate(
    sys: SystemModel,
    des: ClosedLoopDesign,
    sigma_e: np.ndarray,
    horizon: int,
    seed,
    attack: Optional["ReplayAttack"] = None,
    burn_in: int = DEFAULT_BURN_IN,
    opts: SolverOptions = DEFAULT_OPTIONS,
) -> list[StepRecord]:
    """Simulate the watermarked loop and return one record per step.

    Deterministic for a fixed seed. When ``attack`` is given, steps
    k >= attack.nu deliver the observation recorded k0 steps earlier.
    """
    out = simulate_arrays(sys, des, sigma_e, horizon, seed, attack, burn_in, opts)
    return [
        StepRecord(
            k=i + 1,
            y=out.y_delivered[i],
            gamma=out.gamma[i],
            e=out.e[i],
            u=out.u[i],
            attacked=bool(out.attacked[i]),
        )
        for i in range(horizon)
    ]


def stage_cost(sys: SystemModel, x: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Per-step LQG cost x^T W x + u^T U u for trajectory arrays."""
    return np.einsum("ti,ij,tj->t", x, sys.W, x) + np.einsum("ti,ij,tj->t", u, sys.U, u)
