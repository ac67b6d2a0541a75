"""Raster and report serialization (CSV + sidecar, quantized PGM, JSON)."""
from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .scenario import write_pgm

NA = "NA"


def grid_meta(raster, name, extra=None):
    g = raster.grid
    meta = {
        "name": name,
        "width_px": g.width_px,
        "height_px": g.height_px,
        "resolution_m": g.resolution_m,
        "origin": [g.origin[0], g.origin[1]],
        "units": raster.unit,
        "layout": "row-major, row 0 = north",
        "invalid": NA,
    }
    if extra:
        meta.update(extra)
    return meta


def _fmt(v):
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def raster_csv(raster):
    """One CSV row per raster row; invalid cells are ``NA``."""
    vals = raster.values
    integral = np.issubdtype(vals.dtype, np.integer)
    lines = []
    for row, mrow in zip(vals, raster.mask):
        cells = []
        for v, ok in zip(row.tolist(), mrow.tolist()):
            if not ok:
                cells.append(NA)
            elif integral:
                cells.append(str(int(v)))
            else:
                cells.append(repr(float(v)))
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def read_raster_csv(text):
    rows = [line.split(",") for line in text.strip().splitlines()]
    out = np.array([[np.nan if c == NA else float(c) for c in r] for r in rows])
    return out


def quantize(raster, levels=255):
    """
    Affine quantization of valid cells to 1..levels; 0 marks invalid cells.

    Returns (codes, lo, scale) with ``value ~= lo + (code - 1) * scale``.
    """
    v = raster.values.astype(np.float64)
    m = raster.mask & np.isfinite(v)
    codes = np.zeros(v.shape, dtype=np.int64)
    if not m.any():
        return codes, 0.0, 1.0
    lo, hi = float(v[m].min()), float(v[m].max())
    scale = (hi - lo) / (levels - 1) if hi > lo else 1.0
    codes[m] = 1 + np.rint((v[m] - lo) / scale).astype(np.int64)
    return codes, lo, scale


def raster_pgm(raster, name):
    codes, lo, scale = quantize(raster)
    g = raster.grid
    comments = (
        f"{name} [{raster.unit}] grid {g.width_px}x{g.height_px} "
        f"resolution_m={g.resolution_m} origin={list(g.origin)}",
        f"value = {lo!r} + (level - 1) * {scale!r}; level 0 = {NA}",
    )
    return write_pgm(codes, comments=comments, maxval=255)


def write_raster(raster, out_dir, name, formats, extra_meta=None):
    """Write ``raster`` in each requested text format; returns written paths."""
    out_dir = Path(out_dir)
    written = []
    if "csv" in formats:
        p = out_dir / f"{name}.csv"
        p.write_text(raster_csv(raster))
        meta = out_dir / f"{name}.meta.json"
        meta.write_text(json.dumps(grid_meta(raster, name, extra_meta), indent=1) + "\n")
        written += [p, meta]
    if "pgm" in formats:
        p = out_dir / f"{name}.pgm"
        p.write_text(raster_pgm(raster, name))
        written.append(p)
    return written


def _clean(obj):
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if math.isfinite(f) else None
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def dump_json(obj):
    return json.dumps(_clean(obj), indent=1) + "\n"
