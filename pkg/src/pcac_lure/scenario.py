"""Scenario configuration, simulation orchestration and artifact output."""

import copy
import csv
import hashlib
import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .bpre import BpreConfig
from .certify import certificate_trace
from .errors import ConfigError
from .lure import LurePlant, SectorBound, nonlinearity_from_config, step_plant
from .pcac import PcacConfig, PcacState, closed_loop_realization, controller_realization, pcac_step
from .rlsvrf import RlsConfig
from .sslin import FrequencyGrid, StateSpace

__all__ = [
    "SCHEMA_VERSION",
    "EXAMPLE1",
    "ScenarioConfig",
    "load_config",
    "gen_perturbation",
    "perturbation_sequence",
    "RunArtifacts",
    "run_scenario",
    "write_artifacts",
    "frozen_closed_loop",
    "RoaResult",
    "roa_sweep",
    "write_roa",
]

log = logging.getLogger(__name__)

SCHEMA_VERSION = "1"

EXAMPLE1 = {
    "name": "example1",
    "plant": {
        "A": [[1.0, -0.5], [1.0, 0.0]],
        "B": [[1.0], [0.0]],
        "C": [[1.0, -1.0]],
    },
    "nonlinearity": {"kind": "tanh"},
    "sector": {"M1": [[0.0]], "M2": [[1.0]]},
    "M": [[1.0]],
    "N": [0.08],
    "x0": [1000.0, 0.0],
    "steps": 1000,
    "control_start": 50,
    "identify_during_open_loop": False,
    "rls": {
        "order": 10,
        "theta0": 1e-10,
        "psi0": 1e-4,
        "tau_n": 40,
        "tau_d": 200,
        "eta": 0.1,
        "alpha": 0.001,
        "g_form": "sqrt",
    },
    "bpre": {"horizon": 20, "r2": 1e-4},
    "dither": {"kind": "none"},
    "certify": {"grid_points": 4096, "every": 1, "start": 0, "margin": 0.0, "refine": True, "workers": 1},
    "roa": {"source": "frozen", "k_star": None, "extent": 1e6, "points": 21, "horizon": 5000,
            "window": 100, "tol": 1e-6},
    "output": {"dir": "out", "emit_plots": False},
}

DITHER_PRESETS = {
    "impulse": {
        "kind": "impulse",
        "schedule": [[1000, 1.0], [1200, -1.0], [1400, 1.0], [1600, -1.0], [1800, 1.0], [2000, -1.0]],
    },
    "gaussian": {"kind": "gaussian", "start": 1000, "end": 1500, "std": 1.0, "seed": 0},
}

PRESETS = {"example1": EXAMPLE1}


def _deep_merge(base, over):
    out = copy.deepcopy(base)
    for key, val in over.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = _deep_merge(out[key], val)
        else:
            out[key] = copy.deepcopy(val)
    return out


def _matrix(tree, name, shape=None):
    try:
        M = np.atleast_2d(np.asarray(tree, dtype=float))
    except (TypeError, ValueError) as exc:
        raise ConfigError(name, f"not a numeric matrix ({exc})") from None
    if M.ndim != 2 or (shape is not None and M.shape != shape):
        raise ConfigError(name, f"expected shape {shape}, got {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ConfigError(name, "entries must be finite")
    return M


def _int(tree, name, lo=None):
    val = tree
    if isinstance(val, bool) or not isinstance(val, (int, np.integer)):
        if isinstance(val, float) and val.is_integer():
            val = int(val)
        else:
            raise ConfigError(name, f"expected an integer, got {tree!r}")
    if lo is not None and val < lo:
        raise ConfigError(name, f"must be >= {lo}")
    return int(val)


def _apply_overrides(tree, over):
    """Set dotted keys in place; a string section (``dither: impulse``) becomes ``{"kind": ...}``."""
    for key, val in over.items():
        node = tree
        parts = key.split(".")
        for part in parts[:-1]:
            child = node.setdefault(part, {})
            if isinstance(child, str):
                child = node[part] = {"kind": child}
            if not isinstance(child, dict):
                raise ConfigError(key, f"cannot override inside non-mapping {part!r}")
            node = child
        node[parts[-1]] = val


@dataclass(eq=False)
class ScenarioConfig:
    """Fully resolved scenario.  Build with :meth:`from_dict` or :func:`load_config`."""

    raw: dict
    plant: LurePlant
    sector: SectorBound
    M: np.ndarray
    N: np.ndarray
    x0: np.ndarray
    steps: int
    pcac: PcacConfig
    dither: dict
    grid: FrequencyGrid
    cert_every: int
    cert_start: int
    margin: float
    refine: bool
    workers: int
    roa: dict
    out_dir: Path
    emit_plots: bool
    name: str = "scenario"
    _hash: str = field(default=None, repr=False)

    @classmethod
    def from_dict(cls, tree):
        if not isinstance(tree, dict):
            raise ConfigError("<root>", "configuration must be a mapping")
        tree = dict(tree)
        preset = tree.pop("preset", None)
        if preset is not None:
            if preset not in PRESETS:
                raise ConfigError("preset", f"unknown preset {preset!r}; available: {sorted(PRESETS)}")
            tree = _deep_merge(PRESETS[preset], tree)
        dither = tree.get("dither", {"kind": "none"})
        if isinstance(dither, str):
            dither = {"kind": dither}
        if isinstance(dither, dict) and dither.get("kind") in DITHER_PRESETS:
            dither = _deep_merge(DITHER_PRESETS[dither["kind"]], dither)
        tree["dither"] = dither
        for key in ("plant", "rls", "bpre", "certify", "roa", "output"):
            if key not in tree:
                if key in ("certify", "roa", "output"):
                    tree[key] = copy.deepcopy(EXAMPLE1[key])
                else:
                    raise ConfigError(key, "missing section")
            elif key in ("certify", "roa", "output"):
                tree[key] = _deep_merge(EXAMPLE1[key], tree[key])
        return cls._build(tree)

    @classmethod
    def _build(cls, tree):
        pl = tree["plant"]
        if not isinstance(pl, dict):
            raise ConfigError("plant", "expected a mapping with A, B, C")
        A = _matrix(pl.get("A"), "plant.A")
        n = A.shape[0]
        if A.shape != (n, n):
            raise ConfigError("plant.A", f"must be square, got {A.shape}")
        B = _matrix(pl.get("B"), "plant.B")
        if B.shape[0] != n:
            B = B.T
        if B.shape[0] != n:
            raise ConfigError("plant.B", f"needs {n} rows")
        C = _matrix(pl.get("C"), "plant.C")
        if C.shape[1] != n:
            raise ConfigError("plant.C", f"needs {n} columns")
        p, m = C.shape[0], B.shape[1]
        if p != m:
            raise ConfigError("plant", "componentwise nonlinearities need as many outputs as inputs")
        try:
            gamma = nonlinearity_from_config(tree.get("nonlinearity", "tanh"))
        except (TypeError, ValueError) as exc:
            raise ConfigError("nonlinearity", str(exc)) from None
        plant = LurePlant(StateSpace(A, B, C), gamma)
        sec = tree.get("sector", {})
        try:
            sector = SectorBound(_matrix(sec.get("M1"), "sector.M1", (m, p)), _matrix(sec.get("M2"), "sector.M2", (m, p)))
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError("sector", str(exc)) from None
        M = _matrix(tree.get("M", [[1.0]]), "M", (p, p))
        if np.min(np.linalg.eigvalsh(0.5 * (M + M.T))) <= 0:
            raise ConfigError("M", "must be positive definite")
        Nv = np.asarray(tree.get("N", [0.08]), dtype=float).reshape(-1)
        if Nv.size == 1 and p > 1:
            Nv = np.full(p, Nv[0])
        if Nv.size != p or np.any(Nv <= 0):
            raise ConfigError("N", f"needs {p} positive diagonal entries")
        x0 = np.asarray(tree.get("x0", np.zeros(n)), dtype=float).reshape(-1)
        if x0.size != n:
            raise ConfigError("x0", f"needs {n} entries")
        steps = _int(tree.get("steps", 1000), "steps", 0)
        rls_t = dict(tree["rls"])
        try:
            rls = RlsConfig(p=p, m=m, **rls_t)
        except (TypeError, ValueError) as exc:
            raise ConfigError("rls", str(exc)) from None
        bp = tree["bpre"]
        try:
            bpre = BpreConfig.output_weighted(rls.order * p, p, m, horizon=_int(bp.get("horizon", 20), "bpre.horizon", 1),
                                              r2=float(bp.get("r2", 1e-4)))
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError("bpre", str(exc)) from None
        kc = _int(tree.get("control_start", 50), "control_start", 0)
        pcac = PcacConfig(rls, bpre, kc, bool(tree.get("identify_during_open_loop", False)))
        dither = _check_dither(tree["dither"], m)
        ce = tree["certify"]
        grid_n = _int(ce.get("grid_points", 4096), "certify.grid_points", 2)
        roa = dict(tree["roa"])
        if roa.get("source") not in ("open", "frozen"):
            raise ConfigError("roa.source", "must be 'open' or 'frozen'")
        for key in ("points", "horizon", "window"):
            roa[key] = _int(roa[key], f"roa.{key}", 1)
        if roa["window"] > roa["horizon"] + 1:
            raise ConfigError("roa.window", "exceeds the horizon")
        if roa.get("k_star") is not None:
            roa["k_star"] = _int(roa["k_star"], "roa.k_star", 0)
        out = tree["output"]
        cfg = cls(
            raw=tree, plant=plant, sector=sector, M=M, N=np.diag(Nv), x0=x0, steps=steps, pcac=pcac,
            dither=dither, grid=FrequencyGrid(grid_n), cert_every=_int(ce.get("every", 1), "certify.every", 0),
            cert_start=_int(ce.get("start", 0), "certify.start", 0), margin=float(ce.get("margin", 0.0)),
            refine=bool(ce.get("refine", True)), workers=_int(ce.get("workers", 1), "certify.workers", 1),
            roa=roa, out_dir=Path(out.get("dir", "out")), emit_plots=bool(out.get("emit_plots", False)),
            name=str(tree.get("name", "scenario")),
        )
        return cfg

    def with_overrides(self, **over):
        """New config with top-level or dotted-key overrides (``"rls.eta": 0.2``)."""
        tree = copy.deepcopy(self.raw)
        _apply_overrides(tree, over)
        return ScenarioConfig.from_dict(tree)

    @property
    def seed(self):
        return self.dither.get("seed")

    @property
    def config_hash(self):
        if self._hash is None:
            canon = json.dumps(self.raw, sort_keys=True, default=str)
            self._hash = hashlib.sha256(canon.encode()).hexdigest()[:16]
        return self._hash


def _check_dither(d, m):
    if not isinstance(d, dict):
        raise ConfigError("dither", "expected a mapping")
    kind = d.get("kind", "none")
    d = dict(d, kind=kind)
    if kind == "none":
        return d
    if kind == "impulse":
        sched = d.get("schedule")
        if not sched:
            raise ConfigError("dither.schedule", "impulse dither needs (step, value) pairs")
        try:
            d["schedule"] = [[int(s), float(v)] for s, v in sched]
        except (TypeError, ValueError):
            raise ConfigError("dither.schedule", "entries must be (step, value) pairs") from None
        return d
    if kind == "gaussian":
        if d.get("seed") is None:
            raise ConfigError("dither.seed", "a seed is required for gaussian dither")
        d["seed"] = _int(d["seed"], "dither.seed", 0)
        if d["seed"] >= 2**64:
            raise ConfigError("dither.seed", "must fit in 64 bits")
        d["start"] = _int(d.get("start", 1000), "dither.start", 0)
        d["end"] = _int(d.get("end", 1500), "dither.end", d["start"])
        d["std"] = float(d.get("std", 1.0))
        return d
    raise ConfigError("dither.kind", f"unknown dither {kind!r}; use none, impulse or gaussian")


def load_config(path, **overrides):
    """Read a YAML scenario file and apply dotted-key overrides."""
    path = Path(path)
    try:
        tree = yaml.safe_load(path.read_text())
    except OSError as exc:
        raise ConfigError(str(path), f"cannot read ({exc.strerror})") from None
    except yaml.YAMLError as exc:
        raise ConfigError(str(path), f"invalid YAML ({exc})") from None
    if tree is None:
        tree = {}
    if not isinstance(tree, dict):
        raise ConfigError("<root>", "configuration must be a mapping")
    _apply_overrides(tree, overrides)
    return ScenarioConfig.from_dict(tree)


def perturbation_sequence(cfg, steps=None):
    """Dither ``v_k`` for ``k = 0..steps``, shape ``(steps + 1, m)``.

    Gaussian values come from numpy's PCG64 generator seeded with the
    configured seed; exactly ``end - start + 1`` standard normal draws are
    taken in step order, so a run's dither does not depend on its length.
    """
    steps = cfg.steps if steps is None else steps
    m = cfg.plant.linear.m
    v = np.zeros((steps + 1, m))
    d = cfg.dither
    if d["kind"] == "impulse":
        for k, val in d["schedule"]:
            if 0 <= k <= steps:
                v[k] = val
    elif d["kind"] == "gaussian":
        lo, hi = d["start"], d["end"]
        draws = np.random.Generator(np.random.PCG64(d["seed"])).standard_normal((hi - lo + 1, m)) * d["std"]
        top = min(hi, steps)
        if lo <= top:
            v[lo: top + 1] = draws[: top - lo + 1]
    return v


def gen_perturbation(cfg, k):
    """``v_k`` for a single step."""
    if k < 0:
        return np.zeros(cfg.plant.linear.m)
    return perturbation_sequence(cfg, max(k, 0))[k]


@dataclass
class RunArtifacts:
    columns: list
    rows: list
    summary: dict
    snapshots: list = field(default_factory=list, repr=False)
    y: np.ndarray = None
    u: np.ndarray = None


def _cert_schedule(cfg, steps):
    if cfg.cert_every <= 0:
        return []
    return [k for k in range(cfg.cert_start, steps + 1) if (k - cfg.cert_start) % cfg.cert_every == 0]


def frozen_closed_loop(cfg, snapshot):
    """Closed-loop linear part ``(A~, B~, C~)`` from a PCAC snapshot."""
    ctrl = controller_realization(snapshot.model, snapshot.K)
    return closed_loop_realization(cfg.plant.linear, ctrl)


def _names(base, count):
    return [base] if count == 1 else [f"{base}_{i}" for i in range(count)]


CERT_COLUMNS = [
    "alpha_cc", "beta_cc", "cc1", "cc2", "cc_pass",
    "zeta1", "zeta2", "zeta3_min_eig", "alpha_tc", "beta_tc", "tc1", "tc2", "tc3", "tc_pass",
    "all_pass", "cert_error",
]


def _fmt(x):
    if isinstance(x, str):
        return x
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def _first_pass(ks, ok):
    """First step where ``ok`` holds and the step after which it holds through the end."""
    first = next((k for k, o in zip(ks, ok) if o), None)
    pass_from = None
    for k, o in zip(reversed(ks), reversed(ok)):
        if not o:
            break
        pass_from = k
    return first, pass_from


def run_scenario(cfg, *, write=True, keep_snapshots=False):
    """Simulate the closed loop, certify the scheduled steps and (optionally) write artifacts.

    Returns a :class:`RunArtifacts`; per-step numerical failures are
    flagged in the table instead of aborting the run.
    """
    t0 = time.perf_counter()
    plant = cfg.plant
    p, m = plant.linear.p, plant.linear.m
    steps = cfg.steps
    v = perturbation_sequence(cfg)
    state = PcacState.initial(cfg.pcac)
    x = cfg.x0.copy()
    u = np.zeros(m)
    ys = np.empty((steps + 1, p))
    us = np.empty((steps + 1, m))
    thetas = np.empty((steps + 1, cfg.pcac.rls.n_params))
    betas = np.empty(steps + 1)
    flags = []
    snaps = {}
    sched = set(_cert_schedule(cfg, steps))
    all_snaps = [] if keep_snapshots else None
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(steps + 1):
            x_next, y = step_plant(plant, x, u, v[k])
            ys[k], us[k] = y, u
            state, u_next, snap = pcac_step(state, y, u)
            thetas[k] = state.rls.theta
            betas[k] = state.rls.last_beta
            flags.append(state.message)
            if k in sched:
                snaps[k] = snap
            if all_snaps is not None:
                all_snaps.append(snap)
            x, u = x_next, u_next
    ks = sorted(snaps)
    systems = []
    pre_errors = {}
    for k in ks:
        try:
            systems.append((k, frozen_closed_loop(cfg, snaps[k])))
        except Exception as exc:  # malformed snapshot is recorded, not fatal
            pre_errors[k] = f"{type(exc).__name__}: {exc}"
    trace = certificate_trace(systems, cfg.sector, cfg.M, cfg.N, cfg.grid, margin=cfg.margin,
                              refine=cfg.refine, workers=cfg.workers)
    by_k = {e.k: e for e in trace}

    columns = ["k", *_names("y", p), *_names("u", m), *_names("v", m), "rls_beta",
               *[f"theta_{i}" for i in range(thetas.shape[1])], *CERT_COLUMNS, "cert_evaluated", "step_flag"]
    rows = []
    for k in range(steps + 1):
        row = [k, *ys[k], *us[k], *v[k], betas[k], *thetas[k]]
        e = by_k.get(k)
        if e is not None and e.circle is not None:
            c, t = e.circle, e.tsypkin
            row += [c.alpha, c.beta, c.cc1_pass, c.cc2_pass, c.passed, t.zeta1, t.zeta2, t.zeta3_min_eig,
                    t.alpha, t.beta, t.tc1_pass, t.tc2_pass, t.tc3_pass, t.passed, c.passed and t.passed, t.reason,
                    True]
        elif k in sched:
            err = e.error if e is not None else pre_errors.get(k, "not evaluated")
            row += ["nan", "nan", False, False, False, "nan", 0, "nan", "nan", "nan", False, False, False, False,
                    False, err, True]
        else:
            row += ["nan", "nan", "", "", "", "nan", "", "nan", "nan", "nan", "", "", "", "", "", "", False]
        row.append(flags[k])
        rows.append([_fmt(x_) for x_ in row])

    evaluated = [e for e in trace if e.circle is not None]
    eks = [e.k for e in trace]
    cc_ok = [e.circle is not None and e.circle.passed for e in trace]
    tc_ok = [e.circle is not None and e.tsypkin.passed for e in trace]
    all_ok = [a and b for a, b in zip(cc_ok, tc_ok)]
    kc = cfg.pcac.control_start
    closed = [ok for k, ok in zip(eks, cc_ok) if k >= kc]
    summary = {
        "schema_version": SCHEMA_VERSION,
        "name": cfg.name,
        "config_hash": cfg.config_hash,
        "seed": cfg.seed,
        "prng": "numpy PCG64" if cfg.dither["kind"] == "gaussian" else None,
        "steps": steps,
        "control_start": kc,
        "final_abs_y": float(np.max(np.abs(ys[-1]))),
        "max_abs_y": float(np.max(np.abs(ys))) if np.all(np.isfinite(ys)) else float("inf"),
        "flagged_steps": int(sum(1 for f in flags if f)),
        "certified_steps": len(eks),
        "certificate_errors": len(eks) - len(evaluated),
        "cc_fail_fraction_closed_loop": (1.0 - float(np.mean(closed))) if closed else None,
        "wall_time_s": None,
    }
    for label, ok in (("cc", cc_ok), ("tc", tc_ok), ("all", all_ok)):
        first, pass_from = _first_pass(eks, ok)
        summary[f"first_pass_{label}"] = first
        summary[f"pass_from_{label}"] = pass_from
    summary["wall_time_s"] = round(time.perf_counter() - t0, 3)
    art = RunArtifacts(columns, rows, summary, all_snaps if keep_snapshots else [snaps[k] for k in ks], ys, us)
    if write:
        write_artifacts(art, cfg.out_dir)
    return art


def write_artifacts(art, out_dir):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "timeseries.csv", "w", newline="") as fh:
        fh.write(f"# schema_version={SCHEMA_VERSION}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(art.columns)
        w.writerows(art.rows)
    with open(out_dir / "summary.json", "w") as fh:
        json.dump(art.summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return out_dir


@dataclass
class RoaResult:
    x1: np.ndarray
    x2: np.ndarray
    converged: np.ndarray  # (len(x2), len(x1)) boolean
    tail_max: np.ndarray  # max |y| over the final window
    source: str
    k_star: int = None

    @property
    def fraction(self):
        return float(np.mean(self.converged))


def _roa_linear(cfg, source, k_star):
    if source == "open":
        return cfg.plant.linear, None
    base = cfg.with_overrides(**{"certify.every": 0})
    k_star = base.steps if k_star is None else k_star
    base = base.with_overrides(steps=k_star)
    art = run_scenario(base, write=False, keep_snapshots=True)
    return frozen_closed_loop(cfg, art.snapshots[k_star]), k_star


def roa_sweep(cfg, source=None, k_star=None, *, extent=None, points=None, horizon=None, window=None, tol=None,
              linear=None):
    """Region-of-attraction map over a square grid of initial plant states.

    With ``source="frozen"`` the closed loop's linear part is frozen at step
    ``k_star`` (default: the configured ``steps``) of a run of ``cfg`` and
    the controller state starts at zero for every grid point.  Each point
    counts as converged when ``max |y|`` over the final ``window`` steps is
    below ``tol``.
    """
    r = cfg.roa
    source = source or r["source"]
    k_star = r.get("k_star") if k_star is None else k_star
    extent = r["extent"] if extent is None else extent
    points = r["points"] if points is None else points
    horizon = r["horizon"] if horizon is None else horizon
    window = r["window"] if window is None else window
    tol = r["tol"] if tol is None else tol
    if linear is None:
        linear, k_star = _roa_linear(cfg, source, k_star)
    n_p = cfg.plant.linear.n
    if n_p != 2:
        raise ConfigError("plant", "the ROA grid covers two-state plants only")
    grid = np.linspace(-extent, extent, points)
    X1, X2 = np.meshgrid(grid, grid)
    X = np.zeros((X1.size, linear.n))
    X[:, 0], X[:, 1] = X1.ravel(), X2.ravel()
    gamma = cfg.plant.gamma
    A, B, C = linear.A, linear.B, linear.C
    tail = np.zeros(X.shape[0])
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(horizon + 1):
            Y = X @ C.T
            if k > horizon - window:
                tail = np.maximum(tail, np.max(np.abs(Y), axis=1))
            X = X @ A.T + gamma(Y) @ B.T
    tail = np.where(np.isfinite(tail), tail, np.inf)
    conv = (tail < tol).reshape(X1.shape)
    return RoaResult(grid, grid, conv, tail.reshape(X1.shape), source, k_star)


def write_roa(res, out_dir):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / f"roa_{res.source}.csv", "w", newline="") as fh:
        fh.write(f"# schema_version={SCHEMA_VERSION} source={res.source} k_star={res.k_star}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x1", "x2", "converged", "tail_max_abs_y"])
        for i, x2 in enumerate(res.x2):
            for j, x1 in enumerate(res.x1):
                w.writerow([_fmt(x1), _fmt(x2), _fmt(bool(res.converged[i, j])), _fmt(res.tail_max[i, j])])
    return out_dir / f"roa_{res.source}.csv"
