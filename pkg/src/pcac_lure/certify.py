"""Instantaneous circle and Tsypkin absolute-stability certificates."""

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, EigenFailure, PcacLureError
from .sslin import (
    FrequencyGrid,
    ResponseEvaluator,
    StateSpace,
    hermitian_min_eig_batch,
    observability_rank,
    spectral_radius,
)

__all__ = [
    "CircleReport",
    "TsypkinReport",
    "circle_realization",
    "tsypkin_realization",
    "sweep_min_eig",
    "circle_certificate",
    "tsypkin_certificate",
    "certificate_trace",
    "scan_N",
]

GOLDEN_ITERS = 30
_INVPHI = (np.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class CircleReport:
    alpha: float
    beta: float
    cc1_pass: bool
    cc2_pass: bool
    argmin_psi: float = float("nan")
    singular_points: int = 0
    margin: float = 0.0

    @property
    def passed(self):
        return self.cc1_pass and self.cc2_pass


@dataclass(frozen=True)
class TsypkinReport:
    zeta1: float
    zeta2: int
    zeta2_full: int
    zeta3_min_eig: float
    alpha: float
    beta: float
    tc1_pass: bool
    tc2_pass: bool
    tc3_pass: bool
    N: tuple = ()
    argmin_psi: float = float("nan")
    singular_points: int = 0
    reason: str = ""
    margin: float = 0.0

    @property
    def passed(self):
        return self.tc1_pass and self.tc2_pass and self.tc3_pass


def _square(M, size, name):
    M = np.asarray(M, dtype=float)
    if M.ndim == 0:
        M = float(M) * np.eye(size)
    elif M.ndim == 1:
        M = np.diag(M)
    if M.shape != (size, size):
        raise DimensionMismatch(f"{name} must be {size}x{size}, got {M.shape}")
    return M


def circle_realization(sys, bound):
    """Realization of ``H = [I - M2 G][I - M1 G]^{-1}`` for strictly proper ``G``."""
    if not sys.strictly_proper:
        raise DimensionMismatch("circle criterion needs a strictly proper system")
    M1, M2 = bound.M1, bound.M2
    if M1.shape != (sys.m, sys.p):
        raise DimensionMismatch(f"sector bound must be {sys.m}x{sys.p}")
    return StateSpace(sys.A + sys.B @ M1 @ sys.C, sys.B, (M1 - M2) @ sys.C, np.eye(sys.m))


def tsypkin_realization(sys, M, N):
    """Realization of ``L_N = M^{-1} - [I + (1 - q^{-1}) N] G`` with one delay state per output."""
    n, p, m = sys.n, sys.p, sys.m
    A_L = np.block([[sys.A, np.zeros((n, p))], [sys.C, np.zeros((p, p))]])
    B_L = np.vstack([sys.B, np.zeros((p, m))])
    C_L = np.hstack([-(np.eye(p) + N) @ sys.C, N])
    return StateSpace(A_L, B_L, C_L, np.linalg.inv(M))


def _herm_part_min(ev, psi):
    X, singular = ev(psi)
    if X.shape[1] == 1 and X.shape[2] == 1:
        # SISO: the Hermitian part is twice the real part
        out = 2.0 * X[:, 0, 0].real
        out[singular] = np.nan
        return out
    X[singular] = np.nan
    return hermitian_min_eig_batch(X + np.conj(np.swapaxes(X, -1, -2)))


def _herm_part_at(ev, psi):
    X = ev.at(psi)
    if X is None:
        return np.nan
    if X.shape == (1, 1):
        return 2.0 * X[0, 0].real
    return float(np.linalg.eigvalsh(X + X.conj().T)[0])


def sweep_min_eig(sys, grid, refine=True):
    """Minimum over ``[0, pi]`` of ``lambda_min(X(e^{j psi}) + X(e^{j psi})^H)``.

    Returns ``(value, argmin_psi, n_singular)``.  Grid points with a
    singular resolvent count as ``-inf``.  With ``refine`` a golden-section
    search on the two grid cells around the grid argmin sharpens the value.
    """
    ev = ResponseEvaluator(sys)
    psi = grid.points
    vals = _herm_part_min(ev, psi)
    bad = np.isnan(vals)
    if bad.any():
        i = int(np.argmax(bad))
        return -np.inf, float(psi[i]), int(bad.sum())
    i = int(np.argmin(vals))
    best, arg = float(vals[i]), float(psi[i])
    if refine:
        a = float(psi[max(i - 1, 0)])
        b = float(psi[min(i + 1, psi.size - 1)])
        c = b - _INVPHI * (b - a)
        d = a + _INVPHI * (b - a)
        fc, fd = _herm_part_at(ev, c), _herm_part_at(ev, d)
        for _ in range(GOLDEN_ITERS):
            if not (np.isfinite(fc) and np.isfinite(fd)):
                break
            if fc < fd:
                b, d, fd = d, c, fc
                c = b - _INVPHI * (b - a)
                fc = _herm_part_at(ev, c)
            else:
                a, c, fc = c, d, fd
                d = a + _INVPHI * (b - a)
                fd = _herm_part_at(ev, d)
        for val, at in ((fc, c), (fd, d)):
            if np.isfinite(val) and val < best:
                best, arg = float(val), float(at)
    return best, arg, 0


def _spr(A):
    try:
        return spectral_radius(A)
    except EigenFailure:
        return np.inf


def circle_certificate(sys, bound, grid=None, *, margin=0.0, refine=True):
    """Circle criterion quantities for a fixed linear part and sector bound.

    ``alpha`` is the spectral radius of the ``H`` realization and ``beta``
    the frequency-sweep minimum of the smallest eigenvalue of ``H + H^H``.
    CC1 holds when ``alpha < 1 - margin`` and CC2 when ``beta > margin``.
    """
    grid = grid or FrequencyGrid()
    H = circle_realization(sys, bound)
    alpha = _spr(H.A)
    if np.isfinite(alpha):
        beta, arg, nbad = sweep_min_eig(H, grid, refine)
    else:
        beta, arg, nbad = -np.inf, float("nan"), 0
    return CircleReport(alpha, beta, bool(alpha < 1.0 - margin), bool(beta > margin), arg, nbad, margin)


def tsypkin_certificate(sys, M=1.0, N=0.08, grid=None, *, margin=0.0, refine=True, rank_tol=None):
    """Tsypkin criterion quantities.

    TC1 requires ``det(C A^{-1} B) != 0`` (relative to the scale
    ``||C|| ||B|| / sigma_min(A)``), observability of
    ``(A, C + N C - N C A^{-1})`` and ``M^{-1} + M^{-T} > 0``.  TC2 is
    ``spr(L_N) < 1`` and TC3 a positive sweep minimum of the Hermitian part
    of ``L_N``.
    """
    grid = grid or FrequencyGrid()
    if sys.p != sys.m:
        raise DimensionMismatch("Tsypkin criterion needs a square system")
    if not sys.strictly_proper:
        raise DimensionMismatch("Tsypkin criterion needs a strictly proper system")
    p = sys.p
    M = _square(M, p, "M")
    N = _square(N, p, "N")
    if np.any(N != np.diag(np.diag(N))) or np.any(np.diag(N) <= 0):
        raise ValueError("N must be diagonal with positive entries")
    Minv = np.linalg.inv(M)
    zeta3 = float(np.min(np.linalg.eigvalsh(Minv + Minv.T)))
    reason = ""
    zeta1, zeta2, tc1_z1 = float("nan"), 0, False
    full = sys.n
    try:
        s = np.linalg.svd(sys.A, compute_uv=False)
        if s[-1] <= np.finfo(float).eps * max(s[0], 1.0) * sys.n:
            raise np.linalg.LinAlgError("A is singular")
        AinvB = np.linalg.solve(sys.A, sys.B)
        Ainv = np.linalg.inv(sys.A)
        zeta1 = float(np.linalg.det(sys.C @ AinvB))
        scale = np.linalg.norm(sys.C, 2) * np.linalg.norm(sys.B, 2) / s[-1]
        tc1_z1 = abs(zeta1) > 1e-12 * scale
        Cobs = sys.C + N @ sys.C - N @ sys.C @ Ainv
        zeta2 = observability_rank(sys.A, Cobs, rank_tol)
        if not tc1_z1:
            reason = "det(C A^-1 B) is numerically zero"
        elif zeta2 != full:
            reason = "observability rank deficient"
    except np.linalg.LinAlgError:
        reason = "A is singular"
    tc1 = bool(tc1_z1 and zeta2 == full and zeta3 > margin)
    if not reason and not zeta3 > margin:
        reason = "M^-1 + M^-T not positive definite"
    L = tsypkin_realization(sys, M, N)
    alpha = _spr(L.A)
    if np.isfinite(alpha):
        beta, arg, nbad = sweep_min_eig(L, grid, refine)
    else:
        beta, arg, nbad = -np.inf, float("nan"), 0
    return TsypkinReport(
        zeta1, int(zeta2), full, zeta3, alpha, beta, tc1, bool(alpha < 1.0 - margin), bool(beta > margin),
        tuple(np.diag(N)), arg, nbad, reason, margin,
    )


@dataclass(frozen=True)
class TraceEntry:
    k: int
    circle: CircleReport = None
    tsypkin: TsypkinReport = None
    error: str = ""


def _trace_one(args):
    k, sys, bound, M, N, grid_count, margin, refine = args
    grid = FrequencyGrid(grid_count)
    try:
        if not (np.all(np.isfinite(sys.A)) and np.all(np.isfinite(sys.B)) and np.all(np.isfinite(sys.C))):
            raise EigenFailure("non-finite realization")
        cr = circle_certificate(sys, bound, grid, margin=margin, refine=refine)
        tr = tsypkin_certificate(sys, M, N, grid, margin=margin, refine=refine)
        return TraceEntry(k, cr, tr)
    except (PcacLureError, np.linalg.LinAlgError, ValueError) as exc:
        return TraceEntry(k, error=f"{type(exc).__name__}: {exc}")


def certificate_trace(systems, bound, M=1.0, N=0.08, grid=None, *, margin=0.0, refine=True, workers=None):
    """Certificates for a sequence of ``(k, StateSpace)`` pairs.

    Errors are recorded per entry and never abort the trace.  With
    ``workers > 1`` steps are evaluated in a process pool; results keep the
    input order.
    """
    grid = grid or FrequencyGrid()
    jobs = [(k, sys, bound, M, N, grid.count, margin, refine) for k, sys in systems]
    if workers and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_trace_one, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    return [_trace_one(j) for j in jobs]


def scan_N(sys, M=1.0, Ns=None, grid=None, **kw):
    """Evaluate the Tsypkin certificate over a list of ``N`` values.

    ``Ns`` defaults to 25 logarithmically spaced values in ``[1e-3, 10]``.
    Returns ``(best_N, best_report, reports)`` where the best report has the
    largest ``beta``.
    """
    Ns = np.logspace(-3, 1, 25) if Ns is None else Ns
    reports = [tsypkin_certificate(sys, M, N, grid, **kw) for N in Ns]
    i = int(np.argmax([r.beta for r in reports]))
    return Ns[i], reports[i], reports
