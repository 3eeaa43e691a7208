"""Figures rendered next to the CSV/JSON report."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

LABELS = {"proposed": "Proposed", "epa": "EPA", "maxutil": "Maximum utility"}
STYLE = {"proposed": "-", "epa": "--", "maxutil": ":"}
COLOR = {"proposed": "C0", "epa": "C1", "maxutil": "C2"}
_PNG_META = {"Software": None}


def _running_mean(series):
    x = np.array([np.nan if v is None else v for v in series], dtype=float)
    ok = ~np.isnan(x)
    csum = np.cumsum(np.where(ok, x, 0.0))
    cnt = np.cumsum(ok)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(cnt > 0, csum / np.maximum(cnt, 1), np.nan)


def plot_jain(report, path):
    fig, ax = plt.subplots(figsize=(6, 3.5))
    for scheme in report.config["schemes"]:
        if scheme == "maxutil":
            continue
        series = report.jain_series(scheme)
        steps = np.arange(1, len(series) + 1)
        raw = np.array([np.nan if v is None else v for v in series])
        ax.plot(steps, raw, STYLE[scheme], color=COLOR[scheme], lw=0.4, alpha=0.3)
        ax.plot(steps, _running_mean(series), STYLE[scheme], color=COLOR[scheme], lw=1.5,
                label=f"{LABELS[scheme]} (running mean)")
    n = report.config["receivers"]
    ax.set_ylim(1.0 / n - 0.02, 1.02)
    ax.set_xlabel("transmission")
    ax.set_ylabel("Jain's index over gains")
    ax.grid(True, alpha=0.3)
    ax.legend(loc="lower right", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120, metadata=_PNG_META)
    plt.close(fig)


def plot_total_utility(report, path):
    fig, ax = plt.subplots(figsize=(6, 3.5))
    for scheme in report.config["schemes"]:
        if scheme == "epa":
            continue
        series = [
            o.results[scheme].total_utility / report.config["receivers"]
            if o.status == "ok" else None
            for o in report.outcomes
        ]
        ax.plot(np.arange(1, len(series) + 1), _running_mean(series), STYLE[scheme],
                color=COLOR[scheme], label=LABELS[scheme])
    ax.set_xlabel("transmission")
    ax.set_ylabel("average utility (running mean)")
    ax.grid(True, alpha=0.3)
    ax.legend(loc="lower right", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120, metadata=_PNG_META)
    plt.close(fig)


def plot_receiver_utilities(report, path):
    schemes = report.config["schemes"]
    n = report.config["receivers"]
    width = 0.8 / max(len(schemes), 1)
    fig, ax = plt.subplots(figsize=(6, 3.5))
    x = np.arange(n)
    for i, scheme in enumerate(schemes):
        means = [m["mean"] or 0.0 for m in report.summary["schemes"][scheme]["mean_utility"]]
        ax.bar(x + i * width, means, width, color=COLOR[scheme], label=LABELS[scheme])
    u_min = [u["u_min"] for u in report.config["utilities"]]
    ax.scatter(x + 0.4 - width / 2, u_min, marker="_", s=400, color="k", label="U_min", zorder=3)
    ax.set_xticks(x + 0.4 - width / 2)
    ax.set_xticklabels([f"rx{r + 1}\n{u['kind']}" for r, u in enumerate(report.config["utilities"])])
    ax.set_ylim(0, 1.05)
    ax.set_ylabel("mean utility")
    ax.legend(fontsize=8, loc="lower left")
    fig.tight_layout()
    fig.savefig(path, dpi=120, metadata=_PNG_META)
    plt.close(fig)


def render_report_figures(report, out_dir) -> list:
    out = Path(out_dir)
    paths = []
    schemes = set(report.config["schemes"])
    if schemes & {"proposed", "epa"}:
        paths.append(out / "jain.png")
        plot_jain(report, paths[-1])
    if schemes & {"proposed", "maxutil"}:
        paths.append(out / "utility.png")
        plot_total_utility(report, paths[-1])
    if schemes:
        paths.append(out / "receiver_utilities.png")
        plot_receiver_utilities(report, paths[-1])
    return paths
