"""
Baseline (non-RIS) path loss between a site and a pixel.

Free-space plus urban macro/micro style formulas, gated by an exact
raster line-of-sight walk. All formulas accept numpy arrays.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._kernels import los_many, los_walk

MIN_URBAN_DISTANCE_M = 10.0

# Coefficients per regime. LOS: a + b*log10(d3d) + c*log10(f).
# NLOS: a + b*log10(d3d) + c*log10(f) - k*(h_ue - 1.5).
URBAN_COEFFS = {
    "uma": {"los": (28.0, 22.0, 20.0), "nlos": (13.54, 39.08, 20.0, 0.6)},
    "umi": {"los": (32.4, 21.0, 20.0), "nlos": (22.4, 35.3, 21.3, 0.3)},
}


@dataclass(frozen=True)
class LinkGeometry:
    d2d_m: float
    d3d_m: float
    tx_height_m: float
    rx_height_m: float
    frequency_ghz: float

    @classmethod
    def between(cls, a_xy, a_h, b_xy, b_h, frequency_ghz):
        d2d = float(np.hypot(b_xy[0] - a_xy[0], b_xy[1] - a_xy[1]))
        d3d = float(np.hypot(d2d, a_h - b_h))
        return cls(d2d, d3d, a_h, b_h, frequency_ghz)


@dataclass(frozen=True)
class PathlossSample:
    pl_db: float
    los: bool
    geometry: LinkGeometry


def fspl(d_m, f_ghz):
    """Free-space path loss in dB; distances below 1 m are clamped to 1 m."""
    d = np.maximum(d_m, 1.0)
    out = 32.45 + 20.0 * np.log10(f_ghz) + 20.0 * np.log10(d)
    return float(out) if np.ndim(out) == 0 else out


def urban_regime(f_ghz):
    """``"uma"`` below 6 GHz, ``"umi"`` (street canyon) above."""
    return "umi" if f_ghz >= 6.0 else "uma"


def pl_urban(d3d_m, f_ghz, los, ue_height_m=1.5):
    """
    Median urban path loss (dB).

    NLOS is floored at the LOS value; below ``MIN_URBAN_DISTANCE_M`` the
    free-space value is returned for both states.
    """
    d = np.asarray(d3d_m, dtype=np.float64)
    coeff = URBAN_COEFFS[urban_regime(f_ghz)]
    a, b, c = coeff["los"]
    lf = np.log10(f_ghz)
    ld = np.log10(np.maximum(d, 1.0))
    pl_los = a + b * ld + c * lf
    an, bn, cn, k = coeff["nlos"]
    pl_nlos = np.maximum(pl_los, an + bn * ld + cn * lf - k * (ue_height_m - 1.5))
    out = np.where(los, pl_los, pl_nlos)
    out = np.where(d < MIN_URBAN_DISTANCE_M, fspl(d, f_ghz), out)
    return float(out) if out.ndim == 0 else out


def pl_urban_geom(geom, los, ue_height_m=None):
    h = geom.rx_height_m if ue_height_m is None else ue_height_m
    return pl_urban(geom.d3d_m, geom.frequency_ghz, los, h)


def los_check(clutter, a, b):
    """
    Raster line of sight between world points ``a`` and ``b``.

    Each point is ``(x, y, h)``. The sight line is clear when every pixel
    crossed by the 2-D segment is strictly lower than the straight 3-D line
    evaluated at the projection of that pixel's center.
    """
    g = clutter.grid
    u0, v0 = g.to_uv(a[0], a[1])
    u1, v1 = g.to_uv(b[0], b[1])
    return bool(los_walk(clutter.building_height_m, float(u0), float(v0), float(a[2]),
                         float(u1), float(v1), float(b[2])))


def los_to_pixels(clutter, src, rows, cols, rx_height):
    """Vectorized LOS from ``src = (x, y, h)`` to pixel centers at ``rx_height``."""
    g = clutter.grid
    u0, v0 = g.to_uv(src[0], src[1])
    us = np.asarray(cols, dtype=np.float64) + 0.5
    vs = np.asarray(rows, dtype=np.float64) + 0.5
    return los_many(clutter.building_height_m, float(u0), float(v0), float(src[2]),
                    us, vs, float(rx_height))


def site_pathloss(s, site, pixel):
    """Path loss sample from ``site`` to the center of ``pixel = (i, j)`` at UE height."""
    g = s.grid
    f = s.carrier(site.carrier).center_freq_ghz
    xy = g.pixel_center(*pixel)
    geom = LinkGeometry.between(site.position, site.height_m, xy, s.ue.height_m, f)
    los = los_check(s.clutter, (*site.position, site.height_m), (*xy, s.ue.height_m))
    return PathlossSample(pl_urban(geom.d3d_m, f, los, s.ue.height_m), los, geom)


def site_pathloss_map(s, site, mask=None):
    """
    Path loss (dB) and LOS flags from ``site`` to every pixel where ``mask``.

    Pixels outside the mask hold NaN / False. Matches :func:`site_pathloss`
    pixel for pixel.
    """
    g = s.grid
    if mask is None:
        mask = s.clutter.street_mask
    f = s.carrier(site.carrier).center_freq_ghz
    rows, cols = np.nonzero(mask)
    x, y = g.pixel_center(rows, cols)
    d2d = np.hypot(x - site.position[0], y - site.position[1])
    d3d = np.hypot(d2d, site.height_m - s.ue.height_m)
    los = los_to_pixels(s.clutter, (*site.position, site.height_m), rows, cols, s.ue.height_m)
    pl = np.full(g.shape, np.nan)
    los_map = np.zeros(g.shape, dtype=bool)
    pl[rows, cols] = pl_urban(d3d, f, los, s.ue.height_m)
    los_map[rows, cols] = los
    return pl, los_map
