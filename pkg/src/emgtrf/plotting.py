"""SVG report figures: accuracy bars, A-vs-P differences, variance partitions
and weight-map heat maps.

Figures are drawn on bare :class:`matplotlib.figure.Figure` objects (no
pyplot state) and saved with a fixed hash salt and no date stamp, so equal
inputs give byte-identical files.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib
import numpy as np
from matplotlib.figure import Figure

STYLE = {
    "svg.hashsalt": "emgtrf",
    "svg.fonttype": "path",
    "font.size": 8,
    "axes.linewidth": 0.6,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "xtick.major.width": 0.6,
    "ytick.major.width": 0.6,
    "legend.frameon": False,
}

KIND_COLORS = {"A": "#1f77b4", "P": "#ff7f0e", "AP": "#7f7f7f"}
PART_COLORS = {"unique_a": "#1f77b4", "shared": "#9467bd", "unique_p": "#ff7f0e"}


def _save(fig: Figure, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with matplotlib.rc_context(STYLE):
        fig.savefig(path, format="svg", metadata={"Date": None})
    return path


def _figure(width, height, ncols=1):
    with matplotlib.rc_context(STYLE):
        fig = Figure(figsize=(width, height))
        axes = fig.subplots(1, ncols, squeeze=False)[0]
    return fig, axes


def r_bars(summary: list[dict], path, kinds=("A", "P")) -> Path:
    """Mean r +/- SEM per channel and feature set, one panel per mode.

    Dashed segments mark each channel's chance threshold.
    """
    modes = list(dict.fromkeys(row["mode"] for row in summary))
    channels = list(dict.fromkeys(row["channel"] for row in summary))
    kinds = [k for k in kinds if any(row["feature_kind"] == k for row in summary)]
    idx = {(r["mode"], r["feature_kind"], r["channel"]): r for r in summary}
    fig, axes = _figure(2.6 * len(modes) + 0.4, 2.4, len(modes))
    width = 0.8 / max(len(kinds), 1)
    x = np.arange(len(channels))
    with matplotlib.rc_context(STYLE):
        for ax, mode in zip(axes, modes):
            for j, kind in enumerate(kinds):
                rows = [idx.get((mode, kind, ch)) for ch in channels]
                mean = [r["mean_r"] if r else np.nan for r in rows]
                sem = [r["sem_r"] if r else np.nan for r in rows]
                pos = x - 0.4 + width * (j + 0.5)
                ax.bar(pos, mean, width, yerr=sem, color=KIND_COLORS.get(kind, "k"),
                       label=kind, error_kw={"elinewidth": 0.6, "capsize": 1.5})
                for p, r in zip(pos, rows):
                    if r and np.isfinite(r["chance_r"]):
                        ax.hlines(r["chance_r"], p - width / 2, p + width / 2,
                                  colors="k", linestyles="--", linewidth=0.6)
            ax.set_xticks(x, channels, rotation=45)
            ax.set_title(mode)
            ax.axhline(0, color="k", linewidth=0.4)
        axes[0].set_ylabel("Pearson r")
        axes[-1].legend(loc="upper left", bbox_to_anchor=(1.0, 1.0))
        fig.tight_layout()
    return _save(fig, path)


def delta_bars(comparisons, path) -> Path:
    """Per-subject r_A - r_P with the subject mean and BH-adjusted stars."""
    modes = list(dict.fromkeys(c.mode for c in comparisons))
    fig, axes = _figure(2.6 * len(modes) + 0.4, 2.4, len(modes))
    with matplotlib.rc_context(STYLE):
        for ax, mode in zip(axes, modes):
            comps = [c for c in comparisons if c.mode == mode]
            for i, c in enumerate(comps):
                d = np.asarray(c.deltas)
                jitter = np.linspace(-0.2, 0.2, d.size) if d.size > 1 else np.zeros(1)
                ax.bar(i, d.mean(), 0.7, color="#c6dbef", edgecolor="#1f77b4", linewidth=0.6)
                ax.plot(i + jitter, d, "o", ms=2, color="#1f77b4")
                top = max(d.max(), d.mean(), 0.0)
                ax.text(i, top, c.stars, ha="center", va="bottom", fontsize=6)
            ax.set_xticks(np.arange(len(comps)), [c.channel for c in comps], rotation=45)
            ax.axhline(0, color="k", linewidth=0.4)
            ax.set_title(mode)
        axes[0].set_ylabel(r"$\Delta r$ (A $-$ P)")
        fig.tight_layout()
    return _save(fig, path)


def partition_bars(rows: list[dict], path) -> Path:
    """Stacked unique-A, shared and unique-P r^2 per mode and channel."""
    modes = list(dict.fromkeys(r["mode"] for r in rows))
    fig, axes = _figure(2.6 * len(modes) + 0.4, 2.4, len(modes))
    with matplotlib.rc_context(STYLE):
        for ax, mode in zip(axes, modes):
            sub = [r for r in rows if r["mode"] == mode]
            x = np.arange(len(sub))
            pos_base = np.zeros(len(sub))
            neg_base = np.zeros(len(sub))
            for part in ("unique_a", "shared", "unique_p"):
                v = np.array([r[part] for r in sub])
                base = np.where(v >= 0, pos_base, neg_base)
                ax.bar(x, v, 0.7, bottom=base, color=PART_COLORS[part], label=part)
                pos_base += np.where(v >= 0, v, 0)
                neg_base += np.where(v < 0, v, 0)
            ax.set_xticks(x, [r["channel"] for r in sub], rotation=45)
            ax.axhline(0, color="k", linewidth=0.4)
            ax.set_title(mode)
        axes[0].set_ylabel(r"$r^2$")
        axes[-1].legend(loc="upper left", bbox_to_anchor=(1.0, 1.0))
        fig.tight_layout()
    return _save(fig, path)


def weight_heatmap(wmap, path, title: str = "") -> Path:
    """Column-normalized feature x channel weight map."""
    m = np.asarray(wmap.matrix)
    fig, axes = _figure(0.35 * m.shape[1] + 1.6, 0.22 * m.shape[0] + 1.0)
    ax = axes[0]
    with matplotlib.rc_context(STYLE):
        im = ax.imshow(m, aspect="auto", cmap="viridis", vmin=0.0, vmax=1.0,
                       interpolation="nearest")
        ax.set_xticks(np.arange(m.shape[1]), wmap.channel_names, rotation=45)
        ax.set_yticks(np.arange(m.shape[0]), wmap.feature_names)
        if title:
            ax.set_title(title)
        fig.colorbar(im, ax=ax, fraction=0.05, label="normalized |w|")
        fig.tight_layout()
    return _save(fig, path)
