"""Per-step predictive cost adaptive control and the realizations used for
certification."""

from dataclasses import dataclass, field

import numpy as np

from .bocf import BocfModel, assemble_model, assemble_state
from .bpre import BpreConfig, bpre_gain
from .errors import DimensionMismatch, PcacLureError
from .rlsvrf import RlsConfig, RlsState, rls_observe, rls_update
from .sslin import StateSpace

__all__ = [
    "PcacConfig",
    "PcacState",
    "Snapshot",
    "ControllerRealization",
    "pcac_step",
    "controller_realization",
    "closed_loop_realization",
]


@dataclass(frozen=True, eq=False)
class PcacConfig:
    """Identification, horizon and scheduling settings.

    ``control_start`` is the first step ``k_c`` at which the requested
    control is applied.  With ``identify_during_open_loop=False`` the
    parameter update is skipped before ``k_c`` (the data history still
    advances).
    """

    rls: RlsConfig = field(default_factory=RlsConfig)
    bpre: BpreConfig = None
    control_start: int = 50
    identify_during_open_loop: bool = False

    def __post_init__(self):
        if self.bpre is None:
            n = self.rls.order * self.rls.p
            object.__setattr__(self, "bpre", BpreConfig.output_weighted(n, self.rls.p, self.rls.m))
        if self.bpre.R1.shape[0] != self.rls.order * self.rls.p:
            raise DimensionMismatch("BPRE weights do not match the model order")
        if self.control_start < 0:
            raise ValueError("control_start must be nonnegative")


@dataclass(frozen=True, eq=False)
class Snapshot:
    """Data needed to certify step ``k``: the model built at ``k`` and the
    gain that generated ``u_k`` (zero before control starts)."""

    k: int
    model: BocfModel
    K: np.ndarray


@dataclass
class PcacState:
    cfg: PcacConfig
    rls: RlsState
    model: BocfModel = None
    gain: np.ndarray = None  # K_{k+1}
    applied_gain: np.ndarray = None  # K_k, the gain behind u_k
    x_m: np.ndarray = None  # x_{m,k+1}
    u_next: np.ndarray = None
    k: int = 0
    flagged: bool = False
    message: str = ""

    @classmethod
    def initial(cls, cfg):
        r = cfg.rls
        zero_gain = np.zeros((r.m, r.order * r.p))
        return cls(cfg=cfg, rls=RlsState.initial(cfg.rls), gain=zero_gain, applied_gain=zero_gain,
                   u_next=np.zeros(r.m))


def pcac_step(state, y, u):
    """Advance the controller by one step.

    Given ``y_k`` (measured with ``u_k`` applied) this updates the
    identifier, rebuilds the model from ``theta_{k+1}``, forms
    ``x_{m,k+1}``, computes ``K_{k+1}`` and returns ``(state, u_{k+1}, snapshot)``.
    Any numerical failure sets ``u_{k+1} = 0`` and flags the step.
    """
    cfg = state.cfg
    r = cfg.rls
    k = state.k
    y = np.asarray(y, dtype=float).reshape(r.p)
    u = np.asarray(u, dtype=float).reshape(r.m)
    active = k + 1 >= cfg.control_start
    applied = state.gain if k >= cfg.control_start else np.zeros_like(state.gain)
    y_past = list(state.rls.y_hist)
    u_past = list(state.rls.u_hist)
    state.flagged = False
    state.message = ""
    try:
        if cfg.identify_during_open_loop or k >= cfg.control_start:
            rls_update(state.rls, y, u)
        else:
            rls_observe(state.rls, y, u)
        model = assemble_model(state.rls.theta, r.order, r.p, r.m)
        xm = assemble_state(model, y, y_past, u_past)
        xm_next = model.A @ xm + model.B @ u
        K = bpre_gain(model.A, model.B, cfg.bpre).K
        u_next = K @ xm_next if active else np.zeros(r.m)
        if not np.all(np.isfinite(u_next)):
            raise PcacLureError("non-finite control")
    except (PcacLureError, np.linalg.LinAlgError, FloatingPointError, ValueError) as exc:
        if state.rls.y_hist[0] is y_past[0]:
            # failure before the history advanced; keep the regressor aligned
            state.rls.push(y, u)
        state.flagged = True
        state.message = f"{type(exc).__name__}: {exc}"
        u_next = np.zeros(r.m)
        model = state.model if state.model is not None else assemble_model(r.theta0, r.order, r.p, r.m)
        K = np.zeros_like(state.gain)
        xm_next = state.x_m
    snap = Snapshot(k, model, applied)
    state.model = model
    state.applied_gain = applied
    state.gain = K
    state.x_m = xm_next
    state.u_next = u_next
    state.k = k + 1
    return state, u_next, snap


@dataclass(frozen=True, eq=False)
class ControllerRealization:
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray

    def as_statespace(self):
        return StateSpace(self.A, self.B, self.C)


def controller_realization(model, K):
    """``A_c = A_m - F C_m + B_m K``, ``B_c = F``, ``C_c = K`` with ``F`` the
    first block column of ``A_m``."""
    K = np.atleast_2d(np.asarray(K, dtype=float))
    if K.shape != (model.m, model.A.shape[0]):
        raise DimensionMismatch(f"gain must be {model.m}x{model.A.shape[0]}, got {K.shape}")
    F = model.first_column
    Ac = model.A - F @ model.C + model.B @ K
    return ControllerRealization(Ac, F.copy(), K.copy())


def closed_loop_realization(plant, ctrl):
    """Positive-feedback interconnection of the plant and the controller.

    ``A~ = [[A, B C_c], [B_c C, A_c]]``, ``B~ = [B; 0]``, ``C~ = [C 0]``.
    """
    if not plant.strictly_proper:
        raise DimensionMismatch("plant must be strictly proper")
    nc = ctrl.A.shape[0]
    if ctrl.B.shape != (nc, plant.p) or ctrl.C.shape != (plant.m, nc):
        raise DimensionMismatch("controller dimensions do not match the plant")
    At = np.block([[plant.A, plant.B @ ctrl.C], [ctrl.B @ plant.C, ctrl.A]])
    Bt = np.vstack([plant.B, np.zeros((nc, plant.m))])
    Ct = np.hstack([plant.C, np.zeros((plant.p, nc))])
    return StateSpace(At, Bt, Ct)
