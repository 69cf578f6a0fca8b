"""Error maps: one marker per frame at its ground-truth position, coloured by error."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from matplotlib.colors import Normalize  # noqa: E402

from .data.world import World  # noqa: E402

POS_OUTLIER_M = 2.0
ORI_OUTLIER_DEG = 45.0
OUTLIER_RGBA = (1.0, 1.0, 0.0, 1.0)
# blue -> green, never yellow, so outliers stay unambiguous
COLORMAP = "winter"
DPI = 100


@dataclass
class ErrorMap:
    path: Path
    colors: np.ndarray  # (N, 4) RGBA per frame
    outliers: np.ndarray  # (N,) bool
    pixels: np.ndarray  # (N, 2) marker centres as (column, row) in the saved image


def marker_colors(errors, limit: float) -> tuple[np.ndarray, np.ndarray]:
    """Colormap over ``[0, limit]``; anything strictly above ``limit`` is yellow."""
    errors = np.asarray(errors, dtype=np.float64)
    cmap = plt.get_cmap(COLORMAP)
    colors = cmap(Normalize(0.0, limit, clip=True)(errors))
    outliers = errors > limit
    colors[outliers] = OUTLIER_RGBA
    return np.asarray(colors), outliers


def parse_size(text: str) -> tuple[int, int]:
    try:
        w, h = (int(v) for v in text.lower().split("x"))
    except ValueError:
        raise ValueError(f"size must look like WIDTHxHEIGHT, got {text!r}") from None
    if w < 16 or h < 16:
        raise ValueError(f"size too small: {text}")
    return w, h


def plot_error_map(
    positions,
    errors,
    limit: float,
    out_path,
    size=(800, 600),
    world: World | None = None,
    title: str = "",
    unit: str = "",
    marker_size: float = 36.0,
) -> ErrorMap:
    positions = np.asarray(positions, dtype=np.float64).reshape(-1, 2)
    colors, outliers = marker_colors(errors, limit)
    fig = plt.figure(figsize=(size[0] / DPI, size[1] / DPI), dpi=DPI)
    ax = fig.add_axes((0.08, 0.08, 0.78, 0.84))
    if world is not None:
        for x0, y0, x1, y1 in world.segments:
            ax.plot([x0, x1], [y0, y1], color="0.4", linewidth=1.0, zorder=1)
    # outliers on top so none is hidden
    order = np.argsort(outliers, kind="stable")
    ax.scatter(positions[order, 0], positions[order, 1], c=colors[order], s=marker_size, linewidths=0, zorder=2)
    ax.set_aspect("equal", adjustable="box")
    if world is not None:
        ax.set_xlim(-0.2, world.extent[0] + 0.2)
        ax.set_ylim(-0.2, world.extent[1] + 0.2)
    elif len(positions):
        lo, hi = positions.min(0), positions.max(0)
        pad = max(0.5, 0.05 * float((hi - lo).max()))
        ax.set_xlim(lo[0] - pad, hi[0] + pad)
        ax.set_ylim(lo[1] - pad, hi[1] + pad)
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    if title:
        ax.set_title(title)
    cax = fig.add_axes((0.88, 0.08, 0.03, 0.84))
    sm = plt.cm.ScalarMappable(Normalize(0.0, limit), plt.get_cmap(COLORMAP))
    fig.colorbar(sm, cax=cax, label=f"error [{unit}] (yellow: > {limit:g})")
    fig.canvas.draw()
    disp = ax.transData.transform(positions) if len(positions) else np.zeros((0, 2))
    pixels = np.column_stack([disp[:, 0], size[1] - disp[:, 1]])
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out_path, dpi=DPI)
    plt.close(fig)
    return ErrorMap(out_path, colors, outliers, pixels)


def plot_eval_dump(dump: dict, out_stem, size=(800, 600), world: World | None = None) -> tuple[ErrorMap, ErrorMap]:
    """Write ``<stem>_position.png`` and ``<stem>_orientation.png`` from a per-frame dump."""
    out_stem = Path(out_stem)
    if out_stem.suffix == ".png":
        out_stem = out_stem.with_suffix("")
    pos = np.column_stack([dump["gt_x"], dump["gt_y"]])
    a = plot_error_map(
        pos, dump["pos_err_m"], POS_OUTLIER_M, f"{out_stem}_position.png", size, world, "position error", "m"
    )
    b = plot_error_map(
        pos, dump["ori_err_deg"], ORI_OUTLIER_DEG, f"{out_stem}_orientation.png", size, world, "orientation error", "deg"
    )
    return a, b
