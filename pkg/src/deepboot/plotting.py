"""Figures rendered to files next to the CSV outputs."""

from __future__ import annotations

from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

COLORS = {"DBS": "tab:blue", "WLB": "tab:orange", "MCMC": "tab:green"}


def _save(fig, path) -> Path:
    path = Path(path)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def density_contours(grids: dict, path, truth=None, title=None) -> Path:
    """One panel per method from ``{method: KdeGrid}``."""
    fig, axes = plt.subplots(1, len(grids), figsize=(4 * len(grids), 3.6), squeeze=False)
    for ax, (method, g) in zip(axes[0], grids.items()):
        levels = np.linspace(0.1, 0.9, 8) * g.density.max()
        ax.contour(g.xs, g.ys, g.density, levels=levels, colors=COLORS.get(method, "k"))
        if truth is not None:
            ax.plot(*truth, marker="*", color="red", ms=10, ls="none")
        i, j = g.coords
        ax.set_xlabel(f"coordinate {i}")
        ax.set_ylabel(f"coordinate {j}")
        ax.set_title(method)
    if title:
        fig.suptitle(title)
    return _save(fig, path)


def metric_bars(summary: list[dict], path, metrics=None) -> Path:
    """Mean +- sd of each metric per method, one panel per metric."""
    by_metric = defaultdict(dict)
    for r in summary:
        if metrics is None or r["metric"] in metrics:
            by_metric[r["metric"]][(r["setting"], r["method"])] = (r["mean"], r["sd"])
    names = sorted(by_metric)
    if not names:
        raise ValueError("nothing to plot")
    cols = min(4, len(names))
    rows = int(np.ceil(len(names) / cols))
    fig, axes = plt.subplots(rows, cols, figsize=(3.4 * cols, 2.8 * rows), squeeze=False)
    for ax, name in zip(axes.flat, names):
        cells = by_metric[name]
        labels = [f"{m}\n{s}" if len({k[0] for k in cells}) > 1 else m for s, m in cells]
        means = [v[0] for v in cells.values()]
        sds = [v[1] for v in cells.values()]
        colors = [COLORS.get(m, "0.5") for _, m in cells]
        ax.bar(range(len(means)), means, yerr=sds, color=colors, capsize=3)
        ax.set_xticks(range(len(means)), labels, fontsize=7)
        ax.set_title(name, fontsize=9)
    for ax in list(axes.flat)[len(names):]:
        ax.set_visible(False)
    return _save(fig, path)


def lasso_path(rows: list[dict], path) -> Path:
    """95% interval bands against ``log lambda`` for each active coordinate."""
    coords = sorted({int(r["coord"]) for r in rows})
    fig, axes = plt.subplots(1, len(coords), figsize=(3.6 * len(coords), 3.2), squeeze=False)
    for ax, c in zip(axes[0], coords):
        for method in ("DBS", "WLB"):
            sel = sorted((r for r in rows if int(r["coord"]) == c and r["method"] == method),
                         key=lambda r: float(r["lambda"]))
            if not sel:
                continue
            lam = np.log([float(r["lambda"]) for r in sel])
            lo = [float(r["lo"]) for r in sel]
            hi = [float(r["hi"]) for r in sel]
            mean = [float(r["mean"]) for r in sel]
            ax.fill_between(lam, lo, hi, color=COLORS[method], alpha=0.25, label=method)
            ax.plot(lam, mean, color=COLORS[method])
        ax.set_xlabel("log lambda")
        ax.set_title(f"coordinate {c}")
    axes[0][0].legend()
    return _save(fig, path)


def sweep_lines(summary: list[dict], path, metric: str = "length+") -> Path:
    """Metric against the swept depth or width (settings named ``...,depth=3``)."""
    series = defaultdict(list)
    for r in summary:
        if r["metric"] != metric or "=" not in r["setting"]:
            continue
        head, _, last = r["setting"].rpartition(",")
        kind, _, value = last.partition("=")
        series[(head, kind)].append((float(value), r["mean"]))
    if not series:
        raise ValueError(f"no sweep rows for {metric!r}")
    fig, ax = plt.subplots(figsize=(5, 3.4))
    for (head, kind), pts in sorted(series.items()):
        pts.sort()
        ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o", label=f"{head} {kind}")
    ax.set_xscale("log", base=2)
    ax.set_ylabel(metric)
    ax.legend(fontsize=7)
    return _save(fig, path)


def bias_vs_n(summary: list[dict], path) -> Path:
    pts = sorted((float(r["setting"].split("=")[1]), r["mean"], r["sd"]) for r in summary
                 if r["metric"] == "bias" and r["setting"].startswith("n="))
    if not pts:
        raise ValueError("no bias rows")
    n, mean, sd = map(np.asarray, zip(*pts))
    fig, ax = plt.subplots(figsize=(4.5, 3.2))
    ax.errorbar(n, mean, yerr=sd, marker="o", capsize=3)
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("n")
    ax.set_ylabel("posterior-mean error")
    return _save(fig, path)


def trace(trace_values, path, window: int = 100) -> Path:
    from .dbs import smoothed

    fig, ax = plt.subplots(figsize=(5, 3.2))
    ax.plot(np.arange(1, len(trace_values) + 1), trace_values, color="0.7", lw=0.5)
    s = smoothed(trace_values, window)
    ax.plot(np.arange(len(trace_values) - len(s) + 1, len(trace_values) + 1), s, color="tab:blue")
    ax.set_xlabel("epoch")
    ax.set_ylabel("objective")
    return _save(fig, path)
