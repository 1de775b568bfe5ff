"""Dense real-matrix primitives: DARE and discrete Lyapunov solvers plus
positive-definite helpers.

All matrices are plain float64 ``numpy.ndarray`` values. Solvers are
fixed-point iterations sized for small state dimensions (n up to ~10);
the Lyapunov solver also ships a direct Kronecker-vectorized solve that
serves as an independent cross-check.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    DimensionMismatch,
    NonConvergence,
    NotPositiveDefinite,
    UnstableMatrix,
)

STABILITY_MARGIN = 1e-9


@dataclass(frozen=True)
class SolverOptions:
    """Numerical policy for the fixed-point solvers.

    tolerance        residual infinity-norm bound for accepted solutions
    max_iterations   iteration cap before NonConvergence
    zero_threshold   magnitude below which an entry counts as structurally zero
    """

    tolerance: float = 1e-10
    max_iterations: int = 100_000
    zero_threshold: float = 1e-9

    def __post_init__(self):
        if self.tolerance <= 0:
            raise ValueError("tolerance must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.zero_threshold <= 0:
            raise ValueError("zero_threshold must be positive")


DEFAULT_OPTIONS = SolverOptions()


def as_matrix(value, name: str = "matrix") -> np.ndarray:
    """Coerce to a 2-D float64 array and reject non-finite entries."""
    arr = np.atleast_2d(np.asarray(value, dtype=float))
    if arr.ndim != 2:
        raise DimensionMismatch(f"{name} must be 2-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def require_square(arr: np.ndarray, name: str = "matrix") -> np.ndarray:
    if arr.shape[0] != arr.shape[1]:
        raise DimensionMismatch(f"{name} must be square, got shape {arr.shape}")
    return arr


def symmetrize(m: np.ndarray) -> np.ndarray:
    """Return (M + M^T) / 2."""
    return 0.5 * (m + m.T)


def spectral_radius(a: np.ndarray) -> float:
    """Largest eigenvalue magnitude of a square matrix."""
    a = require_square(as_matrix(a, "A"), "A")
    try:
        eigs = np.linalg.eigvals(a)
    except np.linalg.LinAlgError as exc:
        raise NonConvergence(f"eigenvalue iteration failed: {exc}") from exc
    return float(np.max(np.abs(eigs))) if eigs.size else 0.0


def cholesky_pd(m: np.ndarray, name: str = "matrix") -> np.ndarray:
    """Lower Cholesky factor; raises NotPositiveDefinite on failure."""
    try:
        return np.linalg.cholesky(symmetrize(m))
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(f"{name} is not positive definite") from exc


def logdet_pd(m: np.ndarray) -> float:
    """Log-determinant of a symmetric positive definite matrix."""
    chol = cholesky_pd(as_matrix(m, "M"))
    return 2.0 * float(np.sum(np.log(np.diag(chol))))


def inverse_pd(m: np.ndarray) -> np.ndarray:
    """Inverse of a symmetric positive definite matrix via Cholesky."""
    m = require_square(as_matrix(m, "M"), "M")
    chol = cholesky_pd(m, "M")
    inv_chol = np.linalg.solve(chol, np.eye(m.shape[0]))
    return symmetrize(inv_chol.T @ inv_chol)


def psd_sqrt(m: np.ndarray, zero_threshold: float = DEFAULT_OPTIONS.zero_threshold) -> np.ndarray:
    """Symmetric square root of a PSD matrix with zero-eigenvalue clipping.

    Eigenvalues in [-zero_threshold, 0) are clipped to zero; anything more
    negative raises NotPositiveDefinite.
    """
    m = require_square(as_matrix(m, "M"), "M")
    lam, vec = np.linalg.eigh(symmetrize(m))
    if np.min(lam, initial=0.0) < -zero_threshold:
        raise NotPositiveDefinite(f"matrix has eigenvalue {lam.min():.3e} < 0")
    lam = np.clip(lam, 0.0, None)
    return (vec * np.sqrt(lam)) @ vec.T


def psd_pinv(m: np.ndarray, zero_threshold: float = DEFAULT_OPTIONS.zero_threshold) -> np.ndarray:
    """Moore-Penrose pseudo-inverse of a PSD matrix via eigendecomposition."""
    m = require_square(as_matrix(m, "M"), "M")
    lam, vec = np.linalg.eigh(symmetrize(m))
    if np.min(lam, initial=0.0) < -zero_threshold:
        raise NotPositiveDefinite(f"matrix has eigenvalue {lam.min():.3e} < 0")
    inv = np.zeros_like(lam)
    keep = lam > zero_threshold
    inv[keep] = 1.0 / lam[keep]
    return (vec * inv) @ vec.T


def _riccati_map(p, a, c, q, r):
    """One application of P -> A P A^T + Q - A P C^T (C P C^T + R)^-1 C P A^T."""
    cpct_r = c @ p @ c.T + r
    chol = cholesky_pd(cpct_r, "C P C^T + R")
    gain_t = np.linalg.solve(chol.T, np.linalg.solve(chol, c @ p @ a.T))
    return symmetrize(a @ p @ a.T + q - (a @ p @ c.T) @ gain_t)


def dare_residual(p, a, c, q, r) -> float:
    """Infinity norm of the Riccati fixed-point defect at P."""
    return float(np.max(np.abs(_riccati_map(p, a, c, q, r) - p)))


def solve_dare(a, c, q, r, opts: SolverOptions = DEFAULT_OPTIONS) -> np.ndarray:
    """Solve P = A P A^T + Q - A P C^T (C P C^T + R)^-1 C P A^T.

    Fixed-point iteration with symmetrization each step, started at Q.
    Transposed arguments (A^T, B^T, W, U) solve the control-side equation.
    Requires Q PSD and R PD; detectability of (A, C) is assumed and shows
    up as NonConvergence when violated.
    """
    a = require_square(as_matrix(a, "A"), "A")
    n = a.shape[0]
    c = as_matrix(c, "C")
    q = require_square(as_matrix(q, "Q"), "Q")
    r = require_square(as_matrix(r, "R"), "R")
    if c.shape[1] != n or q.shape[0] != n or r.shape[0] != c.shape[0]:
        raise DimensionMismatch(
            f"inconsistent shapes A{a.shape} C{c.shape} Q{q.shape} R{r.shape}"
        )
    cholesky_pd(r, "R")
    psd_sqrt(q, opts.zero_threshold)

    p = symmetrize(q.copy())
    for _ in range(opts.max_iterations):
        p_next = _riccati_map(p, a, c, q, r)
        if np.max(np.abs(p_next - p)) <= opts.tolerance:
            p = p_next
            if dare_residual(p, a, c, q, r) <= opts.tolerance:
                return p
        else:
            p = p_next
    raise NonConvergence(
        f"DARE residual {dare_residual(p, a, c, q, r):.3e} after "
        f"{opts.max_iterations} iterations (tolerance {opts.tolerance:.1e})"
    )


def dlyap_residual(x, a, q) -> float:
    """Infinity norm of A X A^T - X + Q."""
    return float(np.max(np.abs(a @ x @ a.T - x + q)))


def _check_dlyap_args(a, q):
    a = require_square(as_matrix(a, "A"), "A")
    q = require_square(as_matrix(q, "Q"), "Q")
    if q.shape[0] != a.shape[0]:
        raise DimensionMismatch(f"A is {a.shape} but Q is {q.shape}")
    rho = spectral_radius(a)
    if rho >= 1.0 - STABILITY_MARGIN:
        raise UnstableMatrix(f"spectral radius {rho:.6f} is not strictly below 1")
    return a, q, rho


def solve_dlyap(a, q, opts: SolverOptions = DEFAULT_OPTIONS, method: str = "fixed_point") -> np.ndarray:
    """Solve A X A^T - X + Q = 0 for stable A and symmetric Q.

    method="fixed_point" accumulates X = sum_i A^i Q (A^T)^i until the next
    term falls below tolerance; method="direct" solves the Kronecker-
    vectorized linear system (I - A (x) A) vec(X) = vec(Q) and is used as
    the oracle for the accumulation.
    """
    a, q, rho = _check_dlyap_args(a, q)
    q = symmetrize(q)
    if method == "direct":
        n = a.shape[0]
        lhs = np.eye(n * n) - np.kron(a, a)
        x = np.linalg.solve(lhs, q.reshape(-1)).reshape(n, n)
        return symmetrize(x)
    if method != "fixed_point":
        raise ValueError(f"unknown method {method!r}")

    # stopping on the projected tail sum_{i>N} ~ term / (1 - rho^2)
    # keeps the truncation itself, not just the residual, below tolerance
    term_bound = 0.5 * opts.tolerance * max(1.0 - rho * rho, STABILITY_MARGIN)
    x = q.copy()
    term = q.copy()
    for _ in range(opts.max_iterations):
        term = a @ term @ a.T
        x += term
        if np.max(np.abs(term)) <= term_bound:
            x = symmetrize(x)
            if dlyap_residual(x, a, q) <= opts.tolerance:
                return x
    raise NonConvergence(
        f"Lyapunov residual {dlyap_residual(symmetrize(x), a, q):.3e} after "
        f"{opts.max_iterations} terms (tolerance {opts.tolerance:.1e})"
    )
