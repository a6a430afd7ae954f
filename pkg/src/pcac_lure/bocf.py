"""Block observable canonical form of the identified ARX model."""

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch

__all__ = ["BocfModel", "unpack_theta", "assemble_model", "assemble_state", "markov_parameters"]


@dataclass(frozen=True, eq=False)
class BocfModel:
    """Realization ``(A_m, B_m, C_m)`` and the coefficient blocks it came from.

    ``F`` has shape ``(order, p, p)`` and ``G`` shape ``(order, p, m)``.
    """

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    F: np.ndarray
    G: np.ndarray

    @property
    def order(self):
        return self.F.shape[0]

    @property
    def p(self):
        return self.F.shape[1]

    @property
    def m(self):
        return self.G.shape[2]

    @property
    def first_column(self):
        """Stacked ``-F_i`` blocks (the first block column of ``A_m``)."""
        return self.A[:, : self.p]


def unpack_theta(theta, order, p, m):
    """Split ``theta = vec([F_1..F_n G_1..G_n])`` into ``F`` and ``G`` block stacks."""
    theta = np.asarray(theta, dtype=float).reshape(-1)
    if theta.size != order * p * (p + m):
        raise DimensionMismatch(f"theta has {theta.size} entries, expected {order * p * (p + m)}")
    X = theta.reshape((p, order * (p + m)), order="F")
    F = X[:, : order * p].reshape(p, order, p).transpose(1, 0, 2)
    G = X[:, order * p:].reshape(p, order, m).transpose(1, 0, 2)
    return np.ascontiguousarray(F), np.ascontiguousarray(G)


def assemble_model(theta, order, p=1, m=1):
    """Block companion realization of the ARX model with coefficients ``theta``."""
    F, G = unpack_theta(theta, order, p, m)
    n = order * p
    A = np.zeros((n, n))
    A[:, :p] = -F.reshape(n, p)
    A[: n - p, p:] = np.eye(n - p)
    B = G.reshape(n, m).copy()
    C = np.zeros((p, n))
    C[:, :p] = np.eye(p)
    return BocfModel(A, B, C, F, G)


def assemble_state(model, y, y_past, u_past):
    """Explicit BOCF state built from measured data.

    Parameters
    ----------
    model : BocfModel
    y : array_like
        Current output ``y_k`` (block 1 of the state).
    y_past, u_past : sequence
        ``y_{k-1}, ..., y_{k-n}`` and ``u_{k-1}, ..., u_{k-n}``, most recent
        first; missing entries are treated as zero.

    Block ``j >= 2`` is
    ``-sum_{i=1}^{n-j+1} F_{i+j-1} y_{k-i} + sum G_{i+j-1} u_{k-i}``.
    """
    n, p, m = model.order, model.p, model.m
    Y = np.zeros((n, p))
    U = np.zeros((n, m))
    for i, v in enumerate(list(y_past)[:n]):
        Y[i] = np.asarray(v, dtype=float).reshape(p)
    for i, v in enumerate(list(u_past)[:n]):
        U[i] = np.asarray(v, dtype=float).reshape(m)
    x = np.empty((n, p))
    x[0] = np.asarray(y, dtype=float).reshape(p)
    for j in range(2, n + 1):
        cnt = n - j + 1
        x[j - 1] = -np.einsum("iab,ib->a", model.F[j - 1:], Y[:cnt]) + np.einsum(
            "iab,ib->a", model.G[j - 1:], U[:cnt]
        )
    return x.reshape(-1)


def markov_parameters(model, count):
    """``C_m A_m^{i-1} B_m`` for ``i = 1..count``, shape ``(count, p, m)``."""
    if count < 1:
        raise ValueError("count must be at least 1")
    out = np.empty((count, model.p, model.m))
    X = model.B
    for i in range(count):
        out[i] = model.C @ X
        X = model.A @ X
    return out
