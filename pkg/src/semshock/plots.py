"""Figure rendering for the report bundle.

Each figure mirrors one of the emitted CSVs: per-lag significance profiles,
per-shock profiles, and rolling-window deviation traces. Files are written
next to the delimited output with deterministic content (fixed dpi, no
timestamps in metadata).
"""

from __future__ import annotations

import logging
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import pandas as pd

log = logging.getLogger(__name__)

_ORIENTATION_COLORS = {
    "left": "tab:blue",
    "right": "tab:red",
    "center": "goldenrod",
    "all": "gray",
    "": "black",
}
_SAVEFIG = dict(dpi=120, metadata={})


def _color(orientation: str) -> str:
    return _ORIENTATION_COLORS.get(orientation, "black")


def plot_lag_profiles(frame: pd.DataFrame, out_dir) -> list[Path]:
    """One figure per (direction, kind): significant proportion vs lag,
    one line per orientation, stars where the group effect is significant."""
    out_dir = Path(out_dir)
    paths = []
    for (direction, kind), sub in frame.groupby(["direction", "kind"], sort=True):
        fig, ax = plt.subplots(figsize=(7, 4.5))
        for orientation, lines in sub.groupby("orientation", sort=True):
            lines = lines.sort_values("lag")
            ax.plot(lines["lag"], lines["proportion_pct"], marker="o",
                    color=_color(orientation), label=orientation or "(none)")
            starred = lines[lines["significant"]]
            if len(starred):
                ax.scatter(starred["lag"], starred["proportion_pct"] + 1.0,
                           marker="*", s=90, color=_color(orientation), zorder=5)
        ax.set_xlabel("lag (days)")
        ax.set_ylabel("significant pairs (%)")
        ax.set_title(f"{direction}, {kind}")
        ax.legend()
        fig.tight_layout()
        path = out_dir / f"lag_profile_{direction}_{kind}.png"
        fig.savefig(path, **_SAVEFIG)
        plt.close(fig)
        paths.append(path)
    return paths


def plot_shock_profiles(frame: pd.DataFrame, out_dir) -> list[Path]:
    """One figure per (direction, kind): grouped bars of significant
    proportion per shock and orientation."""
    out_dir = Path(out_dir)
    paths = []
    for (direction, kind), sub in frame.groupby(["direction", "kind"], sort=True):
        shocks = sorted(sub["shock"].unique())
        orientations = sorted(sub["orientation"].unique())
        width = 0.8 / max(len(orientations), 1)
        fig, ax = plt.subplots(figsize=(7.5, 4.5))
        for k, orientation in enumerate(orientations):
            rows = sub[sub["orientation"] == orientation].set_index("shock")
            xs, heights, stars = [], [], []
            for i, shock in enumerate(shocks):
                if shock not in rows.index:
                    continue
                xs.append(i + k * width)
                heights.append(float(rows.loc[shock, "proportion_pct"]))
                stars.append(bool(rows.loc[shock, "significant"]))
            bars = ax.bar(xs, heights, width=width, color=_color(orientation),
                          label=orientation or "(none)")
            for x, h, starred in zip(xs, heights, stars):
                if starred:
                    ax.text(x, h, "*", ha="center", va="bottom", fontsize=14)
        ax.set_xticks([i + 0.4 - width / 2 for i in range(len(shocks))])
        ax.set_xticklabels(shocks, rotation=20, ha="right")
        ax.set_ylabel("significant pairs (%)")
        ax.set_title(f"{direction}, {kind}")
        ax.legend()
        fig.tight_layout()
        path = out_dir / f"shock_profile_{direction}_{kind}.png"
        fig.savefig(path, **_SAVEFIG)
        plt.close(fig)
        paths.append(path)
    return paths


def plot_deviations(frame: pd.DataFrame, out_dir) -> list[Path]:
    """One figure per (direction, kind): centered MSE-improvement deviation
    per window, one line per orientation."""
    out_dir = Path(out_dir)
    paths = []
    if frame.empty:
        return paths
    for (direction, kind), sub in frame.groupby(["direction", "kind"], sort=True):
        fig, ax = plt.subplots(figsize=(7, 4.5))
        for orientation, lines in sub.groupby("orientation", sort=True):
            lines = lines.sort_values("window")
            ax.plot(lines["window"], lines["deviation"], marker="o",
                    color=_color(orientation), label=orientation or "(none)")
        ax.axhline(0.0, color="black", linewidth=0.8)
        ax.set_xlabel("window")
        ax.set_ylabel("deviation of MSE improvement")
        ax.set_title(f"{direction}, {kind}")
        ax.legend()
        fig.tight_layout()
        path = out_dir / f"deviation_{direction}_{kind}.png"
        fig.savefig(path, **_SAVEFIG)
        plt.close(fig)
        paths.append(path)
    return paths
