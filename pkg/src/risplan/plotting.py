"""
Matplotlib figures written next to the delimited outputs.

Figures are built on bare ``Figure`` objects (no pyplot state) and saved
without timestamp metadata so reruns give identical bytes.
"""
from __future__ import annotations

from pathlib import Path

import numpy as np
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.colors import BoundaryNorm, ListedColormap
from matplotlib.figure import Figure
from matplotlib.patches import Patch

from .coverage import RSRP_CLASSES, SINR_CLASSES

# best -> worst; shared by RSRP and SINR so before/after images line up
CLASS_COLORS = ("#1a9641", "#a6d96a", "#fdae61", "#d7191c")
INVALID_COLOR = "#bdbdbd"
DPI = 100
_PNG_META = {"Software": None}


def _new(width=5.0, height=4.2):
    fig = Figure(figsize=(width, height), dpi=DPI)
    FigureCanvasAgg(fig)
    return fig


def _extent(grid):
    ox, oy = grid.origin
    r = grid.resolution_m
    return (ox, ox + grid.width_px * r, oy, oy + grid.height_px * r)


def _save(fig, path):
    fig.savefig(path, dpi=DPI, metadata=_PNG_META)


def _class_codes(raster, bounds):
    v = raster.values.astype(np.float64)
    codes = np.full(v.shape, 4, dtype=np.int64)
    m = raster.mask
    b = np.asarray(bounds)
    codes[m] = np.sum(v[m][:, None] < b[None, :], axis=1)
    return codes


def plot_class_map(raster, bounds, names, path, title="", unit=""):
    """Four-class heat map with a fixed palette; grey marks building pixels."""
    cmap = ListedColormap(list(CLASS_COLORS) + [INVALID_COLOR])
    norm = BoundaryNorm(np.arange(-0.5, 5.5), cmap.N)
    codes = _class_codes(raster, bounds)
    fig = _new()
    ax = fig.add_subplot(111)
    ax.imshow(codes, cmap=cmap, norm=norm, extent=_extent(raster.grid),
              interpolation="nearest", origin="upper")
    edges = [f">= {bounds[0]:g}"] + [f"[{bounds[k + 1]:g}, {bounds[k]:g})"
                                     for k in range(len(bounds) - 1)] + [f"< {bounds[-1]:g}"]
    handles = [Patch(color=CLASS_COLORS[k], label=f"{names[k]} {edges[k]} {unit}".strip())
               for k in range(4)]
    ax.legend(handles=handles, loc="upper right", framealpha=0.9)
    ax.set_title(title)
    ax.set_xlabel("x (m)")
    ax.set_ylabel("y (m)")
    _save(fig, path)


def plot_rsrp(raster, thresholds, path, title="RSRP"):
    plot_class_map(raster, thresholds.rsrp_class_bounds_dbm, RSRP_CLASSES, path, title, "dBm")


def plot_sinr(raster, thresholds, path, title="SINR"):
    plot_class_map(raster, thresholds.sinr_class_bounds_db, SINR_CLASSES, path, title, "dB")


def plot_continuous(raster, path, title="", label=""):
    v = np.where(raster.mask, raster.values.astype(np.float64), np.nan)
    fig = _new()
    ax = fig.add_subplot(111)
    im = ax.imshow(v, cmap="viridis", extent=_extent(raster.grid),
                   interpolation="nearest", origin="upper")
    fig.colorbar(im, ax=ax, label=label)
    ax.set_title(title)
    ax.set_xlabel("x (m)")
    ax.set_ylabel("y (m)")
    _save(fig, path)


def plot_best_server(raster, paths, path, title="Best server"):
    v = np.where(raster.mask, raster.values, -1).astype(np.float64)
    v[v < 0] = np.nan
    fig = _new()
    ax = fig.add_subplot(111)
    ax.imshow(v, cmap="tab20", extent=_extent(raster.grid), interpolation="nearest",
              origin="upper", vmin=0, vmax=max(len(paths) - 1, 1))
    ax.set_title(f"{title} ({len(paths)} paths)")
    ax.set_xlabel("x (m)")
    ax.set_ylabel("y (m)")
    _save(fig, path)


def plot_deadzones(rsrp, deadzones, path, sites=(), ris_units=(), title="Dead zones"):
    g = rsrp.grid
    img = np.where(rsrp.mask, 1.0, np.nan)
    img[deadzones.mask()] = 0.0
    fig = _new()
    ax = fig.add_subplot(111)
    ax.imshow(img, cmap=ListedColormap(["#d7191c", "#f7f7f7"]), extent=_extent(g),
              interpolation="nearest", origin="upper", vmin=0, vmax=1)
    if sites:
        ax.scatter([s.position[0] for s in sites], [s.position[1] for s in sites],
                   marker="^", c="k", s=30, label="site")
    if ris_units:
        ax.scatter([r.position[0] for r in ris_units], [r.position[1] for r in ris_units],
                   marker="s", c="#2b83ba", s=14, label="RIS")
    if sites or ris_units:
        ax.legend(loc="upper right")
    ax.set_title(f"{title}: {len(deadzones.zones)} zones, "
                 f"{deadzones.total_area_m2 / 1e6:.3f} km$^2$")
    ax.set_xlabel("x (m)")
    ax.set_ylabel("y (m)")
    _save(fig, path)


def plot_sinr_cdf(reports, labels, path):
    fig = _new(4.5, 3.2)
    ax = fig.add_subplot(111)
    for rep, lab in zip(reports, labels):
        x = [p[0] for p in rep.sinr_cdf]
        y = [p[1] for p in rep.sinr_cdf]
        ax.step(x, y, where="post", label=lab)
    ax.set_xlabel("SINR (dB)")
    ax.set_ylabel("CDF")
    ax.set_ylim(0, 1)
    ax.grid(alpha=0.3)
    ax.legend(loc="lower right")
    _save(fig, path)


def render_mapset(maps, thresholds, out_dir, prefix=""):
    """PNG heat maps for one map set; returns the written paths."""
    out_dir = Path(out_dir)
    written = []
    p = out_dir / f"{prefix}rsrp.png"
    plot_rsrp(maps.rsrp, thresholds, p, f"{prefix}RSRP".strip("_"))
    written.append(p)
    p = out_dir / f"{prefix}sinr.png"
    plot_sinr(maps.sinr, thresholds, p, f"{prefix}SINR".strip("_"))
    written.append(p)
    p = out_dir / f"{prefix}throughput.png"
    plot_continuous(maps.throughput, p, f"{prefix}throughput".strip("_"), "bit/s")
    written.append(p)
    p = out_dir / f"{prefix}best_server.png"
    plot_best_server(maps.best_server, maps.server_paths, p)
    written.append(p)
    return written
