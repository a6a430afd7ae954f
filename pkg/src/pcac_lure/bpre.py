"""Backward-propagating Riccati recursion for the receding-horizon gain."""

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, InnerSolveSingular

__all__ = ["BpreConfig", "BpreResult", "bpre_gain", "oracle_lqr_gain"]


def _sym_psd(M, name, strict=False):
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.shape[0] != M.shape[1]:
        raise ValueError(f"{name} must be square")
    if not np.allclose(M, M.T, rtol=1e-12, atol=1e-12):
        raise ValueError(f"{name} must be symmetric")
    lo = np.min(np.linalg.eigvalsh(M)) if M.size else 0.0
    scale = max(1.0, np.max(np.abs(M))) if M.size else 1.0
    if strict and lo <= 0:
        raise ValueError(f"{name} must be positive definite")
    if lo < -1e-12 * scale:
        raise ValueError(f"{name} must be positive semidefinite")
    return M


@dataclass(frozen=True, eq=False)
class BpreConfig:
    """Horizon and weights of the finite-horizon quadratic cost.

    ``E1`` is optional bookkeeping for ``R1 = E1^T E1`` (the performance
    variable ``z = E1 x``); it is validated but not used in computation.
    """

    horizon: int
    R1: np.ndarray
    R2: np.ndarray
    P_term: np.ndarray
    E1: np.ndarray = None

    def __post_init__(self):
        if int(self.horizon) < 1:
            raise ValueError("horizon must be at least 1")
        R1 = _sym_psd(self.R1, "R1")
        R2 = _sym_psd(self.R2, "R2", strict=True)
        P = _sym_psd(self.P_term, "P_term")
        if P.shape != R1.shape:
            raise DimensionMismatch("P_term and R1 must have the same shape")
        object.__setattr__(self, "R1", R1)
        object.__setattr__(self, "R2", R2)
        object.__setattr__(self, "P_term", P)
        if self.E1 is not None:
            E1 = np.atleast_2d(np.asarray(self.E1, dtype=float))
            if E1.shape[1] != R1.shape[0] or np.linalg.norm(E1.T @ E1 - R1) > 1e-10:
                raise ValueError("E1^T E1 must equal R1")
            object.__setattr__(self, "E1", E1)

    @classmethod
    def output_weighted(cls, state_dim, p=1, m=1, horizon=20, r2=1e-4):
        """Weights penalizing the first output block only: ``R1 = P_term = C_m^T C_m``."""
        E1 = np.zeros((p, state_dim))
        E1[:, :p] = np.eye(p)
        R1 = E1.T @ E1
        return cls(horizon, R1, r2 * np.eye(m), R1.copy(), E1)


@dataclass(frozen=True, eq=False)
class BpreResult:
    K: np.ndarray
    P2: np.ndarray


def _gain(A, B, P, R2):
    S = R2 + B.T @ P @ B
    try:
        return np.linalg.solve(S, B.T @ P @ A)
    except np.linalg.LinAlgError as exc:
        raise InnerSolveSingular("R2 + B^T P B is singular") from exc


def bpre_gain(A, B, cfg):
    """Receding-horizon gain ``K`` with ``u = K x``.

    Starting from ``P = P_term`` the recursion
    ``P <- A^T P (A - B Gamma) + R1``, ``Gamma = (R2 + B^T P B)^{-1} B^T P A``
    runs for ``j = horizon, ..., 2`` and the gain uses the final ``P``.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.asarray(B, dtype=float).reshape(A.shape[0], -1)
    if cfg.R1.shape != A.shape or cfg.R2.shape[0] != B.shape[1]:
        raise DimensionMismatch("weights do not match (A, B)")
    P = cfg.P_term.copy()
    for _ in range(cfg.horizon, 1, -1):
        Gam = _gain(A, B, P, cfg.R2)
        P = A.T @ P @ (A - B @ Gam) + cfg.R1
        P = 0.5 * (P + P.T)
    K = -_gain(A, B, P, cfg.R2)
    return BpreResult(K, P)


def oracle_lqr_gain(A, B, cfg, x0):
    """First optimal control of the finite-horizon problem, by dense least squares.

    The cost ``sum_{j=1}^{l} (x_j^T R1 x_j + u_j^T R2 u_j) + x_{l+1}^T P x_{l+1}``
    with ``x_1 = x0`` is linear in the stacked controls; stacking square-root
    factors of the weights gives one least-squares problem.  ``x0`` may be a
    matrix whose columns are separate initial states, in which case the
    result is the first-step gain applied to each column.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    n = A.shape[0]
    B = np.asarray(B, dtype=float).reshape(n, -1)
    m = B.shape[1]
    ell = cfg.horizon
    x0 = np.asarray(x0, dtype=float)
    X0 = x0.reshape(n, -1)

    def sqrt_psd(M):
        w, V = np.linalg.eigh(M)
        return (V * np.sqrt(np.clip(w, 0.0, None))) @ V.T

    Q = sqrt_psd(cfg.R1)
    R = sqrt_psd(cfg.R2)
    Pf = sqrt_psd(cfg.P_term)
    # x_j = A^{j-1} x0 + sum_{i<j} A^{j-1-i} B u_i, j = 1..l+1
    powers = [np.eye(n)]
    for _ in range(ell):
        powers.append(A @ powers[-1])
    rows_u, rows_x = [], []
    for j in range(1, ell + 2):
        W = Q if j <= ell else Pf
        Mu = np.zeros((n, ell * m))
        for i in range(1, j):
            Mu[:, (i - 1) * m: i * m] = powers[j - 1 - i] @ B
        rows_u.append(W @ Mu)
        rows_x.append(W @ powers[j - 1])
    for j in range(ell):
        Mu = np.zeros((m, ell * m))
        Mu[:, j * m: (j + 1) * m] = R
        rows_u.append(Mu)
        rows_x.append(np.zeros((m, n)))
    Phi = np.vstack(rows_u)
    Xi = np.vstack(rows_x)
    U, *_ = np.linalg.lstsq(Phi, -Xi @ X0, rcond=None)
    u1 = U[:m]
    return u1.reshape(m) if x0.ndim == 1 else u1
