"""Lur'e plants: a strictly proper LTI system in positive feedback with a
memoryless nonlinearity, plus sample-based sector checks."""

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch
from .sslin import StateSpace

__all__ = [
    "Nonlinearity",
    "Tanh",
    "Saturation",
    "LinearGain",
    "DeadZone",
    "nonlinearity_from_config",
    "SectorBound",
    "LurePlant",
    "Trajectory",
    "step_plant",
    "simulate",
    "default_samples",
    "verify_sector",
    "verify_disb",
]


class Nonlinearity:
    """Componentwise memoryless map ``R^p -> R^p``."""

    kind = "abstract"

    def __call__(self, y):
        return self.apply(np.asarray(y, dtype=float))

    def apply(self, y):
        raise NotImplementedError

    def sector_bound(self):
        """Analytically known scalar sector ``(lo, hi)`` for each component."""
        raise NotImplementedError

    def to_config(self):
        return {"kind": self.kind}


class Tanh(Nonlinearity):
    kind = "tanh"

    def apply(self, y):
        return np.tanh(y)

    def sector_bound(self):
        return 0.0, 1.0

    def __repr__(self):
        return "Tanh()"


class Saturation(Nonlinearity):
    kind = "saturation"

    def __init__(self, limit=1.0):
        if not limit > 0:
            raise ValueError("saturation limit must be positive")
        self.limit = float(limit)

    def apply(self, y):
        return np.clip(y, -self.limit, self.limit)

    def sector_bound(self):
        return 0.0, 1.0

    def to_config(self):
        return {"kind": self.kind, "limit": self.limit}

    def __repr__(self):
        return f"Saturation({self.limit:g})"


class LinearGain(Nonlinearity):
    kind = "linear"

    def __init__(self, gain):
        self.gain = float(gain)

    def apply(self, y):
        return self.gain * y

    def sector_bound(self):
        # tightest admissible sector; any [lo, hi] containing the gain works
        return self.gain, self.gain

    def to_config(self):
        return {"kind": self.kind, "gain": self.gain}

    def __repr__(self):
        return f"LinearGain({self.gain:g})"


class DeadZone(Nonlinearity):
    kind = "deadzone"

    def __init__(self, width=1.0):
        if not width > 0:
            raise ValueError("dead-zone width must be positive")
        self.width = float(width)

    def apply(self, y):
        return np.sign(y) * np.maximum(np.abs(y) - self.width, 0.0)

    def sector_bound(self):
        return 0.0, 1.0

    def to_config(self):
        return {"kind": self.kind, "width": self.width}

    def __repr__(self):
        return f"DeadZone({self.width:g})"


_KINDS = {"tanh": Tanh, "saturation": Saturation, "linear": LinearGain, "deadzone": DeadZone}


def nonlinearity_from_config(spec):
    """Build a nonlinearity from ``"tanh"`` or a mapping like ``{"kind": "saturation", "limit": 2}``."""
    if isinstance(spec, str):
        spec = {"kind": spec}
    spec = dict(spec)
    kind = str(spec.pop("kind", "")).lower()
    if kind not in _KINDS:
        raise ValueError(f"unknown nonlinearity kind {kind!r}; choose from {sorted(_KINDS)}")
    return _KINDS[kind](**spec)


@dataclass(frozen=True, eq=False)
class SectorBound:
    """Sector ``[M1, M2]``: ``(g(y) - M1 y)^T (g(y) - M2 y) <= 0``."""

    M1: np.ndarray
    M2: np.ndarray

    def __post_init__(self):
        M1 = np.atleast_2d(np.asarray(self.M1, dtype=float))
        M2 = np.atleast_2d(np.asarray(self.M2, dtype=float))
        if M1.shape != M2.shape:
            raise DimensionMismatch(f"M1 {M1.shape} and M2 {M2.shape} differ in shape")
        if M1.shape[0] == M1.shape[1]:
            D = M2 - M1
            if np.min(np.linalg.eigvalsh(0.5 * (D + D.T))) <= 0:
                raise ValueError("M2 - M1 must be positive definite")
        object.__setattr__(self, "M1", M1)
        object.__setattr__(self, "M2", M2)

    @classmethod
    def disb(cls, M):
        M = np.atleast_2d(np.asarray(M, dtype=float))
        return cls(np.zeros_like(M), M)

    def widened(self, eps):
        I = np.eye(*self.M1.shape)
        return SectorBound(self.M1 - eps * I, self.M2 + eps * I)


@dataclass(frozen=True, eq=False)
class LurePlant:
    linear: StateSpace
    gamma: Nonlinearity

    def __post_init__(self):
        if not self.linear.strictly_proper:
            raise DimensionMismatch("the linear part of a Lur'e plant must be strictly proper")
        if self.linear.p != self.linear.m:
            raise DimensionMismatch("componentwise nonlinearities need p == m")


def _vec(v, size, name):
    v = np.asarray(v, dtype=float).reshape(-1)
    if v.size == 1 and size != 1:
        raise DimensionMismatch(f"{name} has length 1, expected {size}")
    if v.size != size:
        raise DimensionMismatch(f"{name} has length {v.size}, expected {size}")
    return v


def step_plant(plant, x, u, v):
    """One step ``y = C x``, ``x+ = A x + B (gamma(y) + u + v)``.

    Returns ``(x_next, y)``.
    """
    G = plant.linear
    x = _vec(x, G.n, "x")
    u = _vec(u, G.m, "u")
    v = _vec(v, G.m, "v")
    y = G.C @ x
    x_next = G.A @ x + G.B @ (plant.gamma(y) + u + v)
    return x_next, y


@dataclass
class Trajectory:
    x: np.ndarray  # (steps + 1, n)
    y: np.ndarray  # (steps + 1, p)


def _seq_value(seq, k, m):
    if seq is None or k >= len(seq):
        return np.zeros(m)
    return np.asarray(seq[k], dtype=float).reshape(m)


def simulate(plant, x0, u_seq=None, v_seq=None, steps=0):
    """Iterate :func:`step_plant` ``steps`` times from ``x0``.

    Input sequences shorter than ``steps`` are treated as zero beyond their
    end.  ``x[k]`` and ``y[k] = C x[k]`` are recorded for ``k = 0..steps``.
    """
    G = plant.linear
    x = _vec(x0, G.n, "x0")
    xs = np.empty((steps + 1, G.n))
    ys = np.empty((steps + 1, G.p))
    for k in range(steps + 1):
        xs[k] = x
        if k == steps:
            ys[k] = G.C @ x
            break
        x, ys[k] = step_plant(plant, x, _seq_value(u_seq, k, G.m), _seq_value(v_seq, k, G.m))
    return Trajectory(xs, ys)


def default_samples(p=1, count=10001, lo=-100.0, hi=100.0):
    """Uniform samples per component, shape ``(count, p)``."""
    grid = np.linspace(lo, hi, count)
    return np.repeat(grid[:, None], p, axis=1)


def _as_samples(samples, p):
    S = np.asarray(samples, dtype=float)
    if S.ndim == 1:
        S = S[:, None] if p == 1 else S[None, :]
    if S.shape[0] == 0:
        raise ValueError("need at least one sample")
    if S.shape[1] != p:
        raise DimensionMismatch(f"samples have {S.shape[1]} components, expected {p}")
    return S


def verify_sector(gamma, bound, samples=None):
    """Sample-based check of the sector inequality.

    Returns
    -------
    ok : bool
        True iff the quadratic form is ``<= 0`` at every sample.
    worst : float
        Largest value of ``(g(y) - M1 y)^T (g(y) - M2 y)`` over the samples.
    """
    p = bound.M1.shape[1]
    S = default_samples(p) if samples is None else _as_samples(samples, p)
    G = np.asarray(gamma(S), dtype=float).reshape(S.shape[0], -1)
    q = np.einsum("ij,ij->i", G - S @ bound.M1.T, G - S @ bound.M2.T)
    worst = float(np.max(q))
    return bool(worst <= 0.0), worst


def verify_disb(gamma, M, samples=None):
    """Check the diagonal, increasing, sector-bounded conditions on samples.

    Diagonality is tested by perturbing one component at a time and
    confirming the others do not move; monotonicity is strict and checked
    over all ordered pairs of distinct sample values per component.
    The default samples cover ``[-10, 10]`` because ``tanh`` saturates to
    exactly 1.0 in double precision beyond about 19.
    """
    M = np.atleast_2d(np.asarray(M, dtype=float))
    p = M.shape[0]
    if M.shape != (p, p) or np.min(np.linalg.eigvalsh(0.5 * (M + M.T))) <= 0:
        return False
    S = default_samples(p, count=2001, lo=-10.0, hi=10.0) if samples is None else _as_samples(samples, p)
    G = np.asarray(gamma(S), dtype=float).reshape(S.shape[0], p)
    # decoupled: component i depends on y_i only
    for i in range(p):
        Sp = S.copy()
        Sp[:, i] += 1.0
        Gp = np.asarray(gamma(Sp), dtype=float).reshape(S.shape[0], p)
        others = np.delete(np.arange(p), i)
        if others.size and not np.array_equal(Gp[:, others], G[:, others]):
            return False
    # sector [0, M]: g^T (g - M y) <= 0
    if np.any(np.einsum("ij,ij->i", G, G - S @ M.T) > 0):
        return False
    for i in range(p):
        order = np.argsort(S[:, i], kind="stable")
        s, g = S[order, i], G[order, i]
        distinct = np.diff(s) > 0
        # sorted distinct inputs with strictly increasing outputs cover all ordered pairs
        keep = np.concatenate([[True], distinct])
        if np.any(np.diff(g[keep]) <= 0):
            return False
        if np.any(np.diff(g)[~distinct] != 0):
            return False
    return True
