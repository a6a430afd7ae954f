"""Dense state-space utilities for small real discrete-time systems.

Everything here is a pure function of its inputs.  Frequency responses are
evaluated on the unit circle ``z = exp(j psi)`` by reducing ``A`` once (to
complex Schur or real Hessenberg form, or by diagonalizing it) and then
solving for all requested frequencies in vectorized sweeps.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import DimensionMismatch, EigenFailure, NearSingularResolvent, NotHermitian

__all__ = [
    "StateSpace",
    "FrequencyGrid",
    "ResponseEvaluator",
    "freq_response",
    "spectral_radius",
    "hermitian_min_eig",
    "hermitian_min_eig_batch",
    "observability_matrix",
    "observability_rank",
]

# Relative pivot size below which the resolvent is treated as singular.
RESOLVENT_RCOND = 1e-13


def _as_matrix(M, name):
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.ndim != 2:
        raise DimensionMismatch(f"{name} must be a 2-D matrix, got shape {M.shape}")
    return M


@dataclass(frozen=True, eq=False)
class StateSpace:
    """Real discrete-time realization ``x+ = A x + B u``, ``y = C x + D u``.

    ``D`` defaults to the ``p x m`` zero matrix.
    """

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray = None

    def __post_init__(self):
        A = _as_matrix(self.A, "A")
        B = np.asarray(self.B, dtype=float)
        C = np.asarray(self.C, dtype=float)
        n = A.shape[0]
        if A.shape != (n, n):
            raise DimensionMismatch(f"A must be square, got {A.shape}")
        if B.ndim == 1:
            B = B.reshape(n, -1) if n else B.reshape(0, -1)
        if C.ndim == 1:
            C = C.reshape(-1, n) if n else C.reshape(-1, 0)
        if B.shape[0] != n:
            raise DimensionMismatch(f"B has {B.shape[0]} rows, expected {n}")
        if C.shape[1] != n:
            raise DimensionMismatch(f"C has {C.shape[1]} columns, expected {n}")
        p, m = C.shape[0], B.shape[1]
        D = np.zeros((p, m)) if self.D is None else _as_matrix(self.D, "D")
        if D.shape != (p, m):
            raise DimensionMismatch(f"D must be {p}x{m}, got {D.shape}")
        for name, val in (("A", A), ("B", B), ("C", C), ("D", D)):
            val.setflags(write=False)
            object.__setattr__(self, name, val)

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def m(self):
        return self.B.shape[1]

    @property
    def p(self):
        return self.C.shape[0]

    @property
    def strictly_proper(self):
        return not np.any(self.D)


@dataclass(frozen=True)
class FrequencyGrid:
    """Uniform grid of ``count`` angles covering ``[0, pi]`` inclusive."""

    count: int = 4096
    points: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if int(self.count) < 2:
            raise ValueError("FrequencyGrid needs at least two points")
        pts = np.linspace(0.0, np.pi, int(self.count))
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    def __len__(self):
        return self.count


def _hessenberg_solve(H, rhs, z):
    """Solve ``(z_i I - H) X_i = rhs`` for every ``z_i``; ``H`` upper Hessenberg.

    Arrays are laid out frequency-last so each elimination step is one
    contiguous vector operation.  Returns ``(X, pivots)`` with ``X`` of shape
    ``(n, k, len(z))`` and the final diagonal pivots ``(n, len(z))``.
    """
    n, k_cols, nz = H.shape[0], rhs.shape[1], z.shape[0]
    M = np.empty((n, n, nz), dtype=complex)
    M[:] = -H[:, :, None]
    idx = np.arange(n)
    M[idx, idx, :] += z
    R = np.empty((n, k_cols, nz), dtype=complex)
    R[:] = rhs[:, :, None]
    for k in range(n - 1):
        a, b = M[k, k:, :], M[k + 1, k:, :]
        swap = np.abs(b[0]) > np.abs(a[0])
        top, bot = np.where(swap, b, a), np.where(swap, a, b)
        rtop = np.where(swap, R[k + 1], R[k])
        rbot = np.where(swap, R[k], R[k + 1])
        piv = top[0]
        lk = np.divide(bot[0], piv, out=np.zeros_like(piv), where=piv != 0)
        M[k, k:, :] = top
        M[k + 1, k:, :] = bot - lk * top
        R[k] = rtop
        R[k + 1] = rbot - lk * rtop
    pivots = M[idx, idx, :]
    safe = np.where(pivots == 0, 1.0, pivots)
    X = np.empty_like(R)
    for i in range(n - 1, -1, -1):
        acc = R[i]
        if i + 1 < n:
            acc = acc - np.einsum("jz,jkz->kz", M[i, i + 1:, :], X[i + 1:])
        X[i] = acc / safe[i]
    return X, pivots


def _triangular_solve(T, rhs, z):
    """Back substitution for ``(z_i I - T) X_i = rhs`` with ``T`` upper triangular.

    Returns ``X`` of shape ``(n, k, len(z))`` and the diagonal pivots
    ``z_i - T_jj`` of shape ``(n, len(z))``.
    """
    n, k_cols, nz = T.shape[0], rhs.shape[1], z.size
    pivots = z[None, :] - np.diag(T)[:, None]
    inv = 1.0 / np.where(pivots == 0, 1.0, pivots)
    X = np.empty((n, k_cols, nz), dtype=complex)
    Xf = X.reshape(n, k_cols * nz)
    for i in range(n - 1, -1, -1):
        acc = rhs[i][:, None] + (T[i, i + 1:] @ Xf[i + 1:]).reshape(k_cols, nz)
        X[i] = acc * inv[i]
    return X, pivots


# Eigenvector condition number above which the modal fast path is abandoned.
MODAL_COND_LIMIT = 1e6


class ResponseEvaluator:
    """Frequency-response evaluator that factors ``A`` once.

    Repeated calls (grid sweep followed by a local refinement) reuse the
    eigen- or Hessenberg decomposition.  Calling it with an array of angles
    returns ``(values, singular_mask)``.
    """

    def __init__(self, sys, method="auto"):
        if method not in ("auto", "schur", "hessenberg", "modal"):
            raise ValueError(f"unknown method {method!r}")
        self.sys = sys
        self.mode = None
        if sys.n == 0:
            self.mode = "static"
            return
        if method in ("auto", "modal") and self._try_modal():
            self.mode = "modal"
        elif method == "modal":
            raise EigenFailure("eigenvector matrix is ill conditioned")
        elif method in ("auto", "schur"):
            T, Z = scipy.linalg.schur(sys.A.astype(complex), output="complex")
            self.T, self.ZB, self.CZ = T, Z.conj().T @ sys.B, sys.C @ Z
            self.t_scale = np.linalg.norm(T, 1)
            self._diag = np.diag(T)
            self._eye = np.eye(sys.n)
            self.mode = "schur"
        else:
            H, Q = scipy.linalg.hessenberg(sys.A, calc_q=True)
            self.H, self.QB, self.CQ = H, Q.T @ sys.B, sys.C @ Q
            self.h_scale = np.linalg.norm(H, 1)
            self.mode = "hessenberg"

    def _try_modal(self):
        sys = self.sys
        try:
            lam, V = np.linalg.eig(sys.A)
        except np.linalg.LinAlgError:
            return False
        if not np.all(np.isfinite(V)) or np.linalg.cond(V) > MODAL_COND_LIMIT:
            return False
        self.lam = lam
        self.W = np.linalg.solve(V, sys.B.astype(complex))
        self.CV = sys.C @ V
        self.lam_max = np.max(np.abs(lam))
        self.residues = self.CV[0] * self.W[:, 0] if sys.p == 1 and sys.m == 1 else None
        return True

    def _modal_sweep(self, psi, z):
        sys = self.sys
        lam = self.lam
        tol = RESOLVENT_RCOND * (2.0 + self.lam_max)
        singular = np.zeros(psi.size, dtype=bool)
        # |z - lam| >= ||lam| - 1|, so only eigenvalues near the circle can be hit
        close = np.abs(np.abs(lam) - 1.0) <= tol
        if close.any():
            singular = np.any(np.abs(z[:, None] - lam[None, close]) <= tol, axis=1)
        # singular points are masked below; silence their inf/nan arithmetic
        with np.errstate(divide="ignore", invalid="ignore"):
            if sys.p == 1 and sys.m == 1:
                # partial fractions sum_i r_i / (z - lam_i) in real arithmetic
                r = self.residues
                gr = np.cos(psi)[:, None] - lam.real
                gi = np.sin(psi)[:, None] - lam.imag
                inv_d = 1.0 / (gr * gr + gi * gi)
                a, b = gr * inv_d, gi * inv_d
                re = a @ r.real + b @ r.imag
                im = a @ r.imag - b @ r.real
                out = (re + 1j * im)[:, None, None] + sys.D
            else:
                gap = z[:, None] - lam[None, :]
                out = np.einsum("pn,zn,nm->zpm", self.CV, 1.0 / gap, self.W) + sys.D
        if singular.any():
            out[singular] = 0.0
        return out, singular

    def at(self, psi):
        """Value at a single angle, or ``None`` if the resolvent is singular there."""
        sys = self.sys
        if self.mode == "static":
            return sys.D.astype(complex)
        z = complex(np.cos(psi), np.sin(psi))
        if self.mode == "modal":
            gap = z - self.lam
            if np.min(np.abs(gap)) <= RESOLVENT_RCOND * (2.0 + self.lam_max):
                return None
            if self.residues is not None:
                return np.array([[(self.residues / gap).sum()]]) + sys.D
            return (self.CV / gap) @ self.W + sys.D
        if self.mode != "schur":
            out, singular = self(np.array([psi]))
            return None if singular[0] else out[0]
        if np.min(np.abs(z - self._diag)) <= RESOLVENT_RCOND * (2.0 + self.t_scale):
            return None
        X = np.linalg.solve(z * self._eye - sys.A, sys.B)
        return sys.C @ X + sys.D

    def __call__(self, psi):
        psi = np.atleast_1d(np.asarray(psi, dtype=float))
        z = np.exp(1j * psi)
        sys = self.sys
        if self.mode == "static":
            out = np.broadcast_to(sys.D.astype(complex), (psi.size, sys.p, sys.m)).copy()
            return out, np.zeros(psi.size, dtype=bool)
        if self.mode == "modal":
            return self._modal_sweep(psi, z)
        if self.mode == "schur":
            X, pivots = _triangular_solve(self.T, self.ZB, z)
            scale = 1.0 + np.abs(z) + self.t_scale
            singular = np.min(np.abs(pivots), axis=0) <= RESOLVENT_RCOND * scale
            out = np.einsum("pn,nmz->zpm", self.CZ, X) + sys.D
            return out, singular
        X, pivots = _hessenberg_solve(self.H, self.QB, z)
        scale = 1.0 + np.abs(z) + self.h_scale
        singular = np.min(np.abs(pivots), axis=0) <= RESOLVENT_RCOND * scale
        out = np.einsum("pn,nmz->zpm", self.CQ, X) + sys.D
        return out, singular


def freq_response(sys, psi, *, on_singular="raise", method="auto"):
    """Evaluate ``C (e^{j psi} I - A)^{-1} B + D``.

    Parameters
    ----------
    sys : StateSpace
    psi : float or array_like
        Angle(s) in radians.
    on_singular : {"raise", "nan"}
        With ``"raise"`` a :class:`NearSingularResolvent` is raised if any
        requested point sits on a numerically singular resolvent.  With
        ``"nan"`` those points are filled with NaN and the caller inspects
        them.
    method : {"auto", "schur", "hessenberg", "modal"}
        ``"modal"`` diagonalizes ``A``; it is the fastest path but only
        accurate for a well conditioned eigenbasis.  ``"schur"`` reduces
        ``A`` to complex Schur form once and back-substitutes per frequency;
        it stays accurate for defective ``A``.  ``"hessenberg"`` runs a
        pivoted elimination on the real Hessenberg form.  ``"auto"`` uses
        the modal path when the eigenvector matrix has condition number
        below ``MODAL_COND_LIMIT`` and Schur otherwise.

    Returns
    -------
    ndarray
        ``(p, m)`` complex matrix for scalar ``psi``; ``(len(psi), p, m)``
        otherwise.
    """
    scalar = np.ndim(psi) == 0
    psi = np.atleast_1d(np.asarray(psi, dtype=float))
    out, singular = ResponseEvaluator(sys, method)(psi)
    if singular.any():
        if on_singular == "raise":
            bad = psi[singular]
            raise NearSingularResolvent(
                f"resolvent singular at {bad.size} frequency point(s), first psi={bad[0]:.6g}",
                mask=singular,
            )
        out[singular] = np.nan
    return out[0] if scalar else out


def spectral_radius(M):
    """Largest eigenvalue magnitude of a square matrix (0 for an empty one)."""
    M = _as_matrix(M, "M")
    if M.shape[0] != M.shape[1]:
        raise DimensionMismatch(f"spectral_radius needs a square matrix, got {M.shape}")
    if M.size == 0:
        return 0.0
    if not np.all(np.isfinite(M)):
        raise EigenFailure("matrix contains non-finite entries")
    try:
        eig = np.linalg.eigvals(M)
    except np.linalg.LinAlgError as exc:
        raise EigenFailure(str(exc)) from exc
    return float(np.max(np.abs(eig)))


def _check_hermitian(X, tol):
    asym = np.linalg.norm(X - np.conj(np.swapaxes(X, -1, -2)), axis=(-2, -1))
    size = np.linalg.norm(X, axis=(-2, -1))
    if np.any(asym > tol * np.maximum(size, np.finfo(float).tiny)):
        raise NotHermitian(f"asymmetry {np.max(asym):.3g} exceeds tolerance")


def hermitian_min_eig(X, tol=1e-8):
    """Smallest eigenvalue of a (numerically) Hermitian matrix.

    The input is symmetrized as ``(X + X^H) / 2`` before decomposition;
    inputs whose asymmetry exceeds ``tol * ||X||`` are rejected.
    """
    X = np.atleast_2d(np.asarray(X, dtype=complex))
    if X.shape[0] != X.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got {X.shape}")
    _check_hermitian(X, tol)
    Xs = 0.5 * (X + X.conj().T)
    return float(np.linalg.eigvalsh(Xs)[0])


def hermitian_min_eig_batch(X, tol=1e-8):
    """Vectorized :func:`hermitian_min_eig` over a stack ``(N, m, m)``.

    NaN entries propagate to NaN results instead of failing the whole stack.
    """
    X = np.asarray(X, dtype=complex)
    bad = ~np.all(np.isfinite(X), axis=(-2, -1))
    out = np.full(X.shape[0], np.nan)
    good = ~bad
    if not good.any():
        return out
    Xg = X[good]
    _check_hermitian(Xg, tol)
    Xs = 0.5 * (Xg + np.conj(np.swapaxes(Xg, -1, -2)))
    if Xs.shape[-1] == 1:
        out[good] = Xs[:, 0, 0].real
    else:
        out[good] = np.linalg.eigvalsh(Xs)[:, 0]
    return out


def observability_matrix(A, Cobs):
    A = _as_matrix(A, "A")
    Cobs = _as_matrix(Cobs, "Cobs")
    n = A.shape[0]
    if A.shape != (n, n) or Cobs.shape[1] != n:
        raise DimensionMismatch(f"incompatible shapes A{A.shape}, C{Cobs.shape}")
    blocks = [Cobs]
    for _ in range(n - 1):
        blocks.append(blocks[-1] @ A)
    return np.vstack(blocks)


def observability_rank(A, Cobs, tol=None):
    """Numerical rank of ``[C; CA; ...; CA^{n-1}]``.

    Singular values are counted when they exceed ``tol * sigma_max``;
    the default ``tol`` is ``1e-9`` times the larger matrix dimension.
    """
    O = observability_matrix(A, Cobs)
    if tol is None:
        tol = 1e-9 * max(O.shape)
    if tol <= 0:
        raise ValueError("tol must be positive")
    s = np.linalg.svd(O, compute_uv=False)
    if s.size == 0 or s[0] == 0:
        return 0
    return int(np.count_nonzero(s > tol * s[0]))
