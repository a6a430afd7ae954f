"""SVG charts rendered from run artifacts on disk."""

import csv
import json
import logging
from pathlib import Path

import numpy as np

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

__all__ = ["read_table", "emit_plots", "plot_roa"]

log = logging.getLogger(__name__)

POS_COLOR = "tab:blue"
NEG_COLOR = "tab:red"


def read_table(path):
    """Load ``timeseries.csv`` into a dict of float columns (blank cells become NaN)."""
    path = Path(path)
    with open(path, newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    reader = csv.reader(lines)
    try:
        header = next(reader)
    except StopIteration:
        return {}
    cols = {h: [] for h in header}
    for row in reader:
        for h, cell in zip(header, row):
            cols[h].append(cell)
    out = {}
    for h, vals in cols.items():
        try:
            out[h] = np.array([float(v) if v != "" else np.nan for v in vals])
        except ValueError:
            out[h] = np.array(vals, dtype=object)
    return out


def _sign_scatter(ax, k, val, label):
    ok = np.isfinite(val)
    k, val = k[ok], val[ok]
    pos = val > 0
    ax.plot(k, val, color="0.75", lw=0.6, zorder=1)
    ax.scatter(k[pos], val[pos], s=3, color=POS_COLOR, zorder=2, label=f"{label} > 0")
    ax.scatter(k[~pos], val[~pos], s=3, color=NEG_COLOR, zorder=2, label=f"{label} <= 0")
    ax.axhline(0.0, color="k", lw=0.5)
    ax.set_ylabel(label)


def _control_line(ax, kc):
    if kc is not None:
        ax.axvline(kc, color="r", ls="--", lw=0.8)


def _save(fig, path):
    try:
        fig.savefig(path, format="svg")
    except OSError as exc:
        raise OSError(f"cannot write plot {path}: {exc.strerror}") from exc
    finally:
        plt.close(fig)
    return path


def _criterion_chart(k, alpha, beta, title, path, kc):
    fig, axes = plt.subplots(2, 1, sharex=True, figsize=(7, 4.5))
    _sign_scatter(axes[0], k, 1.0 - alpha, "1 - alpha")
    _sign_scatter(axes[1], k, beta, "beta")
    for ax in axes:
        _control_line(ax, kc)
    axes[0].set_title(title)
    axes[1].set_xlabel("step k")
    fig.tight_layout()
    return _save(fig, path)


def emit_plots(artifacts_dir, out_dir=None):
    """Render charts for a run directory; returns the list of files written.

    An empty or missing table produces a warning and no files.
    """
    artifacts_dir = Path(artifacts_dir)
    out_dir = Path(out_dir) if out_dir else artifacts_dir
    table_path = artifacts_dir / "timeseries.csv"
    written = []
    tab = read_table(table_path) if table_path.exists() else {}
    kc = None
    summary_path = artifacts_dir / "summary.json"
    if summary_path.exists():
        kc = json.loads(summary_path.read_text()).get("control_start")
    if tab and len(tab.get("k", ())) > 0:
        out_dir.mkdir(parents=True, exist_ok=True)
        k = tab["k"]
        ycols = [c for c in tab if c == "y" or c.startswith("y_")]
        ucols = [c for c in tab if c == "u" or c.startswith("u_")]
        fig, axes = plt.subplots(2, 1, sharex=True, figsize=(7, 4.5))
        for c in ycols:
            axes[0].plot(k, tab[c], lw=0.8, label=c)
        for c in ucols:
            axes[1].plot(k, tab[c], lw=0.8, label=c)
        axes[0].set_ylabel("y")
        axes[1].set_ylabel("u")
        axes[1].set_xlabel("step k")
        for ax in axes:
            _control_line(ax, kc)
        if np.nanmax(np.abs(tab[ycols[0]])) > 100 * max(np.nanmedian(np.abs(tab[ycols[0]])), 1e-300):
            axes[0].set_yscale("symlog", linthresh=1e-3)
        fig.tight_layout()
        written.append(_save(fig, out_dir / "output.svg"))

        th = sorted((c for c in tab if c.startswith("theta_")), key=lambda c: int(c.split("_")[1]))
        if th:
            fig, ax = plt.subplots(figsize=(7, 3.5))
            for c in th:
                ax.plot(k, tab[c], lw=0.6)
            _control_line(ax, kc)
            ax.set_xlabel("step k")
            ax.set_ylabel("theta")
            fig.tight_layout()
            written.append(_save(fig, out_dir / "theta.svg"))

        if "alpha_cc" in tab and np.any(np.isfinite(tab["alpha_cc"])):
            written.append(_criterion_chart(k, tab["alpha_cc"], tab["beta_cc"], "circle criterion",
                                            out_dir / "circle.svg", kc))
            written.append(_criterion_chart(k, tab["alpha_tc"], tab["beta_tc"], "Tsypkin criterion",
                                            out_dir / "tsypkin.svg", kc))
    else:
        log.warning("no rows in %s; no run plots written", table_path)
    for roa_csv in sorted(artifacts_dir.glob("roa_*.csv")):
        f = plot_roa(roa_csv, out_dir / (roa_csv.stem + ".svg"))
        if f is not None:
            written.append(f)
    return written


def plot_roa(csv_path, out_path):
    tab = read_table(csv_path)
    if not tab or len(tab.get("x1", ())) == 0:
        log.warning("no rows in %s; ROA plot skipped", csv_path)
        return None
    Path(out_path).parent.mkdir(parents=True, exist_ok=True)
    conv = tab["converged"] > 0.5
    fig, ax = plt.subplots(figsize=(5, 5))
    ax.scatter(tab["x1"][conv], tab["x2"][conv], s=10, color=POS_COLOR, label="converged")
    ax.scatter(tab["x1"][~conv], tab["x2"][~conv], s=10, color=NEG_COLOR, marker="x", label="not converged")
    ax.set_xlabel("x0[0]")
    ax.set_ylabel("x0[1]")
    ax.set_aspect("equal")
    ax.legend(loc="upper right", fontsize="small")
    ax.set_title(f"{int(conv.sum())}/{conv.size} converged")
    fig.tight_layout()
    return _save(fig, out_path)
