"""SVG plots over the experiment CSV schemas (convenience layer; CSV is the contract)."""
from __future__ import annotations

import warnings
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .diagnostics import GAP_RATIO_COE, GAP_RATIO_CUE, GAP_RATIO_POISSON


class PlotSchemaError(ValueError):
    """CSV columns do not match any known plot schema (CLI exit code 2)."""


def _group_by_n(rows, ykey):
    series = {}
    for r in rows:
        series.setdefault(int(r["n"]), []).append((float(r["W"]), float(r[ykey])))
    return {n: sorted(pts) for n, pts in series.items()}


def _means(points):
    acc = {}
    for w, v in points:
        acc.setdefault(w, []).append(v)
    ws = sorted(acc)
    return np.array(ws), np.array([np.mean(acc[w]) for w in ws])


def _load(csv_path) -> list[dict]:
    from .experiments import read_csv

    rows = read_csv(csv_path)
    if not rows:
        raise PlotSchemaError(f"{csv_path}: empty CSV, nothing to plot")
    return rows


def plot_csv(csv_path, kind: str, out_path, log_y: bool = False,
             references: bool = True) -> Path:
    """Render a known CSV schema to SVG.  Returns the written path."""
    rows = _load(csv_path)
    cols = set(rows[0].keys())
    out_path = Path(out_path)
    if kind == "trajectory":
        if not {"iter", "energy"} <= cols:
            raise PlotSchemaError("trajectory plot needs columns iter, energy")
        fig, ax = plt.subplots(figsize=(6, 4))
        its = [int(r["iter"]) for r in rows]
        ax.plot(its, [float(r["energy"]) for r in rows], label="energy")
        ax.set_xlabel("iteration")
        ax.set_ylabel("energy")
        if "grad_linf" in cols:
            ax2 = ax.twinx()
            vals = np.array([float(r["grad_linf"]) for r in rows])
            ax2.semilogy(its, np.clip(vals, 1e-16, None), color="C1", alpha=0.6,
                         label="|grad|_inf")
            ax2.set_ylabel("|grad|_inf")
        ax.legend(loc="best")
    elif kind == "sweep":
        if {"ipr2", "entropy_half", "sre22"} <= cols:
            fig = _plot_transition(rows, references)
        elif "mean_abs_grad" in cols:
            fig = _plot_gradient(rows)
        elif "r_mean" in cols:
            fig = _plot_levels(rows, references)
        elif "frame_potential" in cols:
            fig = _plot_frame(rows, references)
        else:
            raise PlotSchemaError(f"unrecognized sweep schema: columns {sorted(cols)}")
    else:
        raise PlotSchemaError(f"unknown plot kind {kind!r}")
    if log_y:
        for ax in fig.axes:
            ax.set_yscale("log")
    fig.tight_layout()
    fig.savefig(out_path, format="svg")
    plt.close(fig)
    return out_path


def _plot_transition(rows, references):
    fig, axes = plt.subplots(1, 3, figsize=(12, 3.6))
    for n, pts in sorted(_group_by_n(rows, "ipr2").items()):
        w, v = _means(pts)
        haar = float(next(r["ipr2_haar"] for r in rows if int(r["n"]) == n))
        axes[0].semilogy(w, v / haar, "o-", ms=3, label=f"n={n}")
    if references:
        axes[0].axhline(1.0, color="grey", ls="--", lw=1)
    axes[0].set_ylabel("IPR2 / Haar")
    for n, pts in sorted(_group_by_n(rows, "entropy_half").items()):
        w, v = _means(pts)
        page = float(next(r["entropy_page"] for r in rows if int(r["n"]) == n))
        axes[1].plot(w, v, "o-", ms=3, label=f"n={n}")
        if references:
            axes[1].axhline(page, color="grey", ls="--", lw=1)
    axes[1].set_ylabel("half-chain entropy (nats)")
    for n, pts in sorted(_group_by_n(rows, "sre22").items()):
        w, v = _means(pts)
        lb = float(next(r["sre22_haar_lb"] for r in rows if int(r["n"]) == n))
        axes[2].plot(w, v, "o-", ms=3, label=f"n={n}")
        if references:
            axes[2].axhline(lb, color="grey", ls="--", lw=1)
    axes[2].set_ylabel("low-weight SRE M_{2,2}")
    for ax in axes:
        ax.set_xlabel("kick strength W")
        ax.legend(fontsize=7)
    return fig


def _plot_gradient(rows):
    fig, ax = plt.subplots(figsize=(5.5, 4))
    clipped = 0
    for n, pts in sorted(_group_by_n(rows, "mean_abs_grad").items()):
        w, v = _means(pts)
        if np.any(v <= 0):
            clipped += int(np.sum(v <= 0))
            v = np.clip(v, 1e-16, None)
        ax.semilogy(w, v, "o-", ms=3, label=f"n={n}")
    if clipped:
        warnings.warn(f"{clipped} nonpositive gradient points clipped to axis floor")
    ax.set_xlabel("kick strength W")
    ax.set_ylabel("mean |dE/d theta*|")
    ax.legend(fontsize=7)
    return fig


def _plot_levels(rows, references):
    fig, ax = plt.subplots(figsize=(5.5, 4))
    for n, pts in sorted(_group_by_n(rows, "r_mean").items()):
        w, v = _means(pts)
        ax.plot(w, v, "o-", ms=3, label=f"n={n}")
    if references:
        for val, name in ((GAP_RATIO_CUE, "CUE"), (GAP_RATIO_COE, "COE"),
                          (GAP_RATIO_POISSON, "Poisson")):
            ax.axhline(val, color="grey", ls="--", lw=1)
            ax.annotate(name, (0.99, val), xycoords=("axes fraction", "data"),
                        fontsize=7, ha="right", va="bottom", color="grey")
    ax.set_xlabel("kick strength W")
    ax.set_ylabel("mean gap ratio <r>")
    ax.legend(fontsize=7)
    return fig


def _plot_frame(rows, references):
    fig, ax = plt.subplots(figsize=(5.5, 4))
    for (n, t) in sorted({(int(r["n"]), int(r["t"])) for r in rows}):
        pts = [(float(r["W"]), float(r["frame_potential"]))
               for r in rows if int(r["n"]) == n and int(r["t"]) == t]
        w, v = _means(pts)
        ax.semilogy(w, v, "o-", ms=3, label=f"n={n}, t={t}")
        if references:
            wb = float(next(r["welch_bound"] for r in rows
                            if int(r["n"]) == n and int(r["t"]) == t))
            ax.axhline(wb, color="grey", ls="--", lw=1)
    ax.set_xlabel("kick strength W")
    ax.set_ylabel("frame potential")
    ax.legend(fontsize=7)
    return fig
