"""Recursive least squares with variable-rate forgetting.

The model is the ARX predictor ``y_k = -sum F_i y_{k-i} + sum G_i u_{k-i}``
written as ``y_k = phi_k theta`` with
``phi_k = [-y_{k-1}^T ... -y_{k-n}^T  u_{k-1}^T ... u_{k-n}^T] (x) I_p`` and
``theta = vec([F_1 ... F_n  G_1 ... G_n])`` (column-major).

Forgetting is triggered by an F-test that compares the identification-error
variance over a short recent window with that over a longer window.
"""

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .errors import InnovationSolveFailure, SingularNormalEquations, UnsupportedDimension
from .fdist import f_ppf

__all__ = [
    "RlsConfig",
    "RlsState",
    "VrfResult",
    "regressor",
    "vrf_statistic",
    "vrf_beta",
    "rls_update",
    "rls_observe",
    "batch_oracle",
]

G_FORMS = ("sqrt", "ratio")


@dataclass(frozen=True, eq=False)
class RlsConfig:
    """RLS hyperparameters.

    Parameters
    ----------
    order : int
        Model order ``n``.
    p, m : int
        Output and input dimensions.
    theta0 : array_like or float
        Initial coefficients; a scalar fills the whole vector.
    psi0 : array_like or float
        Initial covariance; a scalar ``s`` means ``s * I``.
    tau_n, tau_d : int
        Short and long error windows.
    eta : float
        Forgetting intensity.
    alpha : float
        Significance level of the F-test.
    g_form : {"sqrt", "ratio"}
        Test statistic. ``"sqrt"`` is ``sqrt(F) - sqrt(F_crit)``,
        ``"ratio"`` is ``F / F_crit - 1``.
    """

    order: int = 10
    p: int = 1
    m: int = 1
    theta0: object = 1e-10
    psi0: object = 1e-4
    tau_n: int = 40
    tau_d: int = 200
    eta: float = 0.1
    alpha: float = 0.001
    g_form: str = "sqrt"
    f_crit: float = field(init=False, repr=False)

    def __post_init__(self):
        if self.order < 1 or self.p < 1 or self.m < 1:
            raise ValueError("order, p and m must be positive")
        if not self.p <= self.tau_n < self.tau_d:
            raise ValueError("window lengths must satisfy p <= tau_n < tau_d")
        if not self.eta > 0:
            raise ValueError("eta must be positive")
        if not 0 < self.alpha <= 1:
            raise ValueError("alpha must lie in (0, 1]")
        if self.g_form not in G_FORMS:
            raise ValueError(f"g_form must be one of {G_FORMS}")
        npar = self.n_params
        th = np.asarray(self.theta0, dtype=float)
        th = np.full(npar, float(th)) if th.ndim == 0 else th.reshape(-1).copy()
        if th.size != npar:
            raise ValueError(f"theta0 must have {npar} entries, got {th.size}")
        ps = np.asarray(self.psi0, dtype=float)
        ps = float(ps) * np.eye(npar) if ps.ndim == 0 else ps.copy()
        if ps.shape != (npar, npar):
            raise ValueError(f"psi0 must be {npar}x{npar}, got {ps.shape}")
        if not np.allclose(ps, ps.T) or np.min(np.linalg.eigvalsh(0.5 * (ps + ps.T))) <= 0:
            raise ValueError("psi0 must be symmetric positive definite")
        for arr in (th, ps):
            arr.setflags(write=False)
        object.__setattr__(self, "theta0", th)
        object.__setattr__(self, "psi0", ps)
        object.__setattr__(self, "f_crit", f_ppf(1.0 - self.alpha, self.tau_n, self.tau_d))

    @property
    def n_params(self):
        return self.order * self.p * (self.p + self.m)


@dataclass
class RlsState:
    """Mutable identifier state.

    ``theta`` and ``psi`` are replaced (never modified in place) by each
    update, so references held by snapshots stay valid.
    """

    cfg: RlsConfig
    theta: np.ndarray
    psi: np.ndarray
    y_hist: deque  # most recent first
    u_hist: deque
    errors: deque
    j: int = 0  # number of parameter updates performed
    last_beta: float = 1.0
    last_g: float = float("nan")
    degenerate: bool = False

    @classmethod
    def initial(cls, cfg):
        n = cfg.order
        return cls(
            cfg=cfg,
            theta=cfg.theta0.copy(),
            psi=cfg.psi0.copy(),
            y_hist=deque([np.zeros(cfg.p) for _ in range(n)], maxlen=n),
            u_hist=deque([np.zeros(cfg.m) for _ in range(n)], maxlen=n),
            errors=deque(maxlen=cfg.tau_d),
        )

    def push(self, y, u):
        self.y_hist.appendleft(np.asarray(y, dtype=float).reshape(self.cfg.p).copy())
        self.u_hist.appendleft(np.asarray(u, dtype=float).reshape(self.cfg.m).copy())


def regressor(state):
    """``phi_k`` of shape ``(p, n p (p + m))`` from the buffered history."""
    p = state.cfg.p
    z = np.concatenate([-np.concatenate(state.y_hist), np.concatenate(state.u_hist)])
    return np.kron(z[None, :], np.eye(p))


@dataclass(frozen=True)
class VrfResult:
    beta: float
    g: float
    degenerate: bool


def vrf_statistic(errors, cfg, j):
    """Forgetting factor ``beta_j`` together with the statistic ``g``.

    ``errors`` holds the most recent identification errors (oldest first),
    at least ``tau_d`` of them once ``j >= tau_d``.
    """
    if j < cfg.tau_d:
        return VrfResult(1.0, float("nan"), False)
    E = np.asarray(errors, dtype=float)
    if E.ndim > 1 and E.shape[1] > 1:
        raise UnsupportedDimension("the F-test forgetting rule is implemented for p = 1 only")
    E = E.reshape(-1)[-cfg.tau_d:]
    if E.size < cfg.tau_d:
        raise ValueError(f"need {cfg.tau_d} errors at j={j}, got {E.size}")
    long_var = np.mean(E**2)
    if not long_var > np.finfo(float).tiny:
        return VrfResult(1.0, float("nan"), True)
    F = np.mean(E[-cfg.tau_n:] ** 2) / long_var
    if cfg.g_form == "sqrt":
        g = np.sqrt(F) - np.sqrt(cfg.f_crit)
    else:
        g = F / cfg.f_crit - 1.0
    beta = 1.0 + cfg.eta * g if g > 0 else 1.0
    return VrfResult(float(beta), float(g), False)


def vrf_beta(errors, cfg, j):
    """Forgetting factor ``beta_j >= 1`` (see :func:`vrf_statistic`)."""
    return vrf_statistic(errors, cfg, j).beta


def rls_update(state, y, u):
    """One RLS step with variable-rate forgetting.

    Forms ``phi_k`` from the history, records the error ``y - phi theta``,
    computes ``beta_k``, updates ``psi`` and ``theta``, then pushes ``y`` and
    the applied input ``u`` into the history.  Returns ``state``.
    """
    cfg = state.cfg
    y = np.asarray(y, dtype=float).reshape(cfg.p)
    phi = regressor(state)
    err = y - phi @ state.theta
    state.errors.append(err[0] if cfg.p == 1 else err.copy())
    res = vrf_statistic(state.errors, cfg, state.j)
    beta = res.beta
    Psi = state.psi
    PphiT = Psi @ phi.T
    S = np.eye(cfg.p) / beta + phi @ PphiT
    try:
        gain = np.linalg.solve(S, PphiT.T)
    except np.linalg.LinAlgError as exc:
        raise InnovationSolveFailure(f"innovation matrix singular at update {state.j}") from exc
    Psi_new = beta * Psi - beta * PphiT @ gain
    Psi_new = 0.5 * (Psi_new + Psi_new.T)
    theta_new = state.theta + Psi_new @ phi.T @ (y - phi @ state.theta)
    if not (np.all(np.isfinite(theta_new)) and np.all(np.isfinite(Psi_new))):
        raise InnovationSolveFailure(f"non-finite RLS update at step {state.j}")
    state.theta = theta_new
    state.psi = Psi_new
    state.last_beta = beta
    state.last_g = res.g
    state.degenerate = res.degenerate
    state.j += 1
    state.push(y, u)
    return state


def rls_observe(state, y, u):
    """Advance the history without touching ``theta`` or ``psi``."""
    state.push(y, u)
    return state


def batch_oracle(cfg, phis, ys, lambdas):
    """Direct minimizer of the exponentially weighted regularized cost.

    Solves
    ``(sum_i (rho_i/rho_k) phi_i^T phi_i + Psi0^{-1}/rho_k) theta
    = sum_i (rho_i/rho_k) phi_i^T y_i + Psi0^{-1} theta0 / rho_k``
    with ``rho_i = prod_{j<=i} 1/lambda_j``.  With no data this returns
    ``theta0``.
    """
    P0inv = np.linalg.inv(cfg.psi0)
    th0 = cfg.theta0
    if len(phis) == 0:
        return th0.copy()
    lam = np.asarray(lambdas, dtype=float)
    # log rho_i relative to rho_k keeps the weights in range
    log_rho = np.cumsum(-np.log(lam))
    w = np.exp(log_rho - log_rho[-1])
    inv_rho_k = np.exp(-log_rho[-1])
    lhs = inv_rho_k * P0inv
    rhs = inv_rho_k * P0inv @ th0
    for wi, phi, y in zip(w, phis, ys):
        phi = np.atleast_2d(phi)
        lhs = lhs + wi * phi.T @ phi
        rhs = rhs + wi * phi.T @ np.atleast_1d(y)
    try:
        return np.linalg.solve(lhs, rhs)
    except np.linalg.LinAlgError as exc:
        raise SingularNormalEquations(str(exc)) from exc
