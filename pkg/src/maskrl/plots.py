"""Deterministic vector-graphics figures from completed result files.

Reruns on identical inputs produce byte-identical SVGs (fixed hash salt,
no embedded dates).
"""

from __future__ import annotations

import json
from collections import defaultdict
from pathlib import Path

from .results import read_rows

__all__ = ["emit_plots"]


def _mpl():
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    matplotlib.rcParams["svg.hashsalt"] = "maskrl"
    return plt


def _save(fig, path: Path):
    fig.savefig(path, format="svg", metadata={"Date": None})
    print(f"wrote {path}")


def _plot_sweep(plt, path: Path, out: Path):
    rows = read_rows(path)
    series: dict[str, dict[int, list[float]]] = defaultdict(lambda: defaultdict(list))
    for row in rows:
        cond = row["condition"].rsplit("-k", 1)[0]
        series[cond][int(row["k"])].append(float(row["raw_mean"]))
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for cond in sorted(series):
        ks = sorted(series[cond])
        means, errs = [], []
        for k in ks:
            xs = series[cond][k]
            means.append(sum(xs) / len(xs))
            if len(xs) > 1:
                from .metrics import mean_ci
                errs.append(mean_ci(xs)[1])
            else:
                errs.append(0.0)
        ax.errorbar(ks, means, yerr=errs, marker="o", capsize=3, label=cond)
    ax.set_xlabel("mask budget k")
    ax.set_ylabel("victim reward")
    ax.legend()
    fig.tight_layout()
    _save(fig, out / "reward-vs-budget.svg")
    plt.close(fig)


def _plot_scaling(plt, path: Path, out: Path):
    rows = read_rows(path)
    usable = [r for r in rows if r["ratio"] not in ("nan", "")]
    if not usable:
        return
    states = [int(r["states"]) for r in usable]
    ratios = [float(r["ratio"]) for r in usable]
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.errorbar(states, ratios, marker="o", capsize=3)
    if len(usable) >= 2:
        from .metrics import log_linear_fit
        import numpy as np
        slope, intercept, r2 = log_linear_fit(states, ratios)
        xs = np.logspace(np.log10(min(states)), np.log10(max(states)), 50)
        ax.plot(xs, slope * np.log10(xs) + intercept, "--",
                label=f"log-linear fit (R^2={r2:.2f})")
        ax.legend()
    ax.set_xscale("log")
    ax.set_xlabel("victim information states")
    ax.set_ylabel("adversarial/random damage ratio")
    fig.tight_layout()
    _save(fig, out / "scaling-ratio.svg")
    plt.close(fig)


def _plot_windows(plt, path: Path, out: Path):
    rows = read_rows(path)
    runs: dict[tuple, list[tuple[int, float]]] = defaultdict(list)
    offsets: dict[tuple, dict[str, int]] = defaultdict(dict)
    order = {"pretrain": 0, "attack": 1, "extension": 2}
    grouped: dict[tuple, dict[str, list[tuple[int, float]]]] = defaultdict(
        lambda: defaultdict(list))
    for row in rows:
        grouped[(row["run"], row["seed"])][row["phase"]].append(
            (int(row["window"]), float(row["mean"])))
    for key, phases in grouped.items():
        offset = 0
        for phase in sorted(phases, key=lambda p: order.get(p, 9)):
            for w, m in sorted(phases[phase]):
                runs[key].append((offset + w, m))
            offsets[key][phase] = offset
            offset += len(phases[phase])
    fig, ax = plt.subplots(figsize=(6, 3.5))
    for key in sorted(runs):
        xs, ys = zip(*sorted(runs[key]))
        ax.plot(xs, ys, label=f"{key[0]} (seed {key[1]})", linewidth=1)
    ax.set_xlabel("training window")
    ax.set_ylabel("window mean reward")
    ax.legend(fontsize=6)
    fig.tight_layout()
    _save(fig, out / "learning-curves.svg")
    plt.close(fig)


def emit_plots(result_dir: str | Path) -> list[Path]:
    """Render every known figure for files found under ``result_dir``."""
    result_dir = Path(result_dir)
    if not result_dir.exists():
        raise FileNotFoundError(result_dir)
    plt = _mpl()
    made = []
    sweep = sorted(result_dir.rglob("sweep.csv"))
    for path in sweep:
        _plot_sweep(plt, path, path.parent)
        made.append(path.parent / "reward-vs-budget.svg")
    for path in sorted(result_dir.rglob("scaling.csv")):
        _plot_scaling(plt, path, path.parent)
        made.append(path.parent / "scaling-ratio.svg")
    for path in sorted(result_dir.rglob("windows.csv")):
        _plot_windows(plt, path, path.parent)
        made.append(path.parent / "learning-curves.svg")
    if not made:
        raise FileNotFoundError(f"no plottable result files under {result_dir}")
    return made
