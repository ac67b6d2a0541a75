"""
RIS-assisted BS -> RIS -> UE links.

Sub-6 GHz links use the multiplicative cascade of two urban path losses;
mmWave links use the two-distance corridor fit. Feasibility gates a link on
incidence angle, the two LOS legs, the distance ranges and the half-space
the UE sits in.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .propagation import los_check, los_to_pixels, pl_urban
from .scenario import STAR

ANGLE_OUT_OF_RANGE = "angle out of range"
NO_LOS_BS_RIS = "no LOS BS->RIS"
NO_LOS_RIS_UE = "no LOS RIS->UE"
DISTANCE_OUT_OF_RANGE = "distance out of range"
WRONG_SIDE = "wrong side"

REFLECT_SIDE = "reflect"
TRANSMIT_SIDE = "transmit"


@dataclass(frozen=True)
class RisLinkGeometry:
    dtx_m: float
    drx_m: float
    incidence_deg: float
    side: str


@dataclass(frozen=True)
class RisFeasibility:
    feasible: bool
    reasons: tuple = field(default_factory=tuple)

    @classmethod
    def from_reasons(cls, reasons):
        return cls(not reasons, tuple(reasons))


def pl_ris_cascade(pl_br, pl_ru):
    """Multiplicative (far-field) cascade of the BS->RIS and RIS->UE losses, in dB."""
    with np.errstate(over="ignore"):
        out = 10.0 * np.log10(np.power(10.0, np.divide(pl_br, 10.0))
                              * np.power(10.0, np.divide(pl_ru, 10.0)))
    return float(out) if np.ndim(out) == 0 else out


def pl_ris_corridor(dtx_m, drx_m):
    """mmWave corridor fit: 24 log10(dtx) + 19.2 log10(drx) + 63.22 dB."""
    out = 24.0 * np.log10(dtx_m) + 19.2 * np.log10(drx_m) + 63.22
    return float(out) if np.ndim(out) == 0 else out


def incidence_angle(site, ris):
    """
    Horizontal angle (deg) between the ray RIS->site and the RIS outward normal.

    0 means the site is straight in front of the surface, 90 in its plane,
    180 directly behind it.
    """
    dx = site.position[0] - ris.position[0]
    dy = site.position[1] - ris.position[1]
    norm = math.hypot(dx, dy)
    if norm == 0.0:
        raise ValueError(f"site {site.site_id} and RIS {ris.ris_id} share a position")
    nx, ny = ris.normal
    cosang = max(-1.0, min(1.0, (dx * nx + dy * ny) / norm))
    return math.degrees(math.acos(cosang))


def slant(a_xy, a_h, b_xy, b_h):
    return float(math.hypot(math.hypot(b_xy[0] - a_xy[0], b_xy[1] - a_xy[1]), a_h - b_h))


def dtx(s, ris):
    donor = s.site(ris.donor_site)
    return slant(donor.position, donor.height_m, ris.position, ris.height_m)


def side_of(ris, xy):
    """Half-space of ``xy``: reflect side iff strictly in front of the surface."""
    nx, ny = ris.normal
    dot = (xy[0] - ris.position[0]) * nx + (xy[1] - ris.position[1]) * ny
    return REFLECT_SIDE if dot > 0 else TRANSMIT_SIDE


def side_split_db(ris, side):
    if side == REFLECT_SIDE:
        return 10.0 * math.log10(ris.beta_r)
    if ris.mode != STAR:
        raise ValueError(f"RIS {ris.ris_id} is reflect-only; transmit side is not served")
    rest = 1.0 - ris.beta_r
    return 10.0 * math.log10(rest) if rest > 0 else -math.inf


def _in(v, rng):
    return rng[0] <= v <= rng[1]


def ris_level_reasons(s, ris, constraints):
    """Pixel-independent feasibility reasons (angle, donor LOS, BS->RIS distance)."""
    donor = s.site(ris.donor_site)
    reasons = []
    if not _in(incidence_angle(donor, ris), constraints.incidence_deg):
        reasons.append(ANGLE_OUT_OF_RANGE)
    if not los_check(s.clutter, (*donor.position, donor.height_m),
                     (*ris.position, ris.height_m)):
        reasons.append(NO_LOS_BS_RIS)
    if not _in(dtx(s, ris), constraints.d_bs_ris_m):
        reasons.append(DISTANCE_OUT_OF_RANGE)
    return reasons


def check_feasibility(s, ris, pixel, constraints):
    """Feasibility of serving ``pixel`` through ``ris``; reasons listed when not."""
    reasons = ris_level_reasons(s, ris, constraints)
    xy = s.grid.pixel_center(*pixel)
    if not los_check(s.clutter, (*ris.position, ris.height_m), (*xy, s.ue.height_m)):
        reasons.append(NO_LOS_RIS_UE)
    drx = slant(ris.position, ris.height_m, xy, s.ue.height_m)
    if not _in(drx, constraints.d_ris_ue_m) and DISTANCE_OUT_OF_RANGE not in reasons:
        reasons.append(DISTANCE_OUT_OF_RANGE)
    if ris.mode != STAR and side_of(ris, xy) != REFLECT_SIDE:
        reasons.append(WRONG_SIDE)
    return RisFeasibility.from_reasons(reasons)


def ris_path_loss(s, ris, dtx_m, drx_m, ue_height_m):
    """Band-routed RIS path loss: corridor fit for mmWave, urban cascade below 6 GHz."""
    donor = s.site(ris.donor_site)
    carrier = s.carrier(donor.carrier)
    if carrier.is_mmwave:
        return pl_ris_corridor(dtx_m, drx_m)
    f = carrier.center_freq_ghz
    pl_br = pl_urban(dtx_m, f, True, ris.height_m)
    pl_ru = pl_urban(drx_m, f, True, ue_height_m)
    return pl_ris_cascade(pl_br, pl_ru)


def ris_budget_db(s, ris):
    donor = s.site(ris.donor_site)
    return donor.tx_power_dbm + donor.antenna_gain_dbi + ris.gain_db - ris.reflection_loss_db


def ris_rx_power(s, ris, pixel):
    """
    Received power (dBm) at ``pixel`` via ``ris``.

    Callers are expected to have checked feasibility; a transmit-side query
    on a reflect-only surface raises ``ValueError``.
    """
    xy = s.grid.pixel_center(*pixel)
    side = side_of(ris, xy)
    split = side_split_db(ris, side)
    drx = max(slant(ris.position, ris.height_m, xy, s.ue.height_m), 1.0)
    d_tx = max(dtx(s, ris), 1.0)
    return ris_budget_db(s, ris) + split - ris_path_loss(s, ris, d_tx, drx, s.ue.height_m)


def ris_power_map(s, ris, constraints, mask):
    """
    RIS-path received power over the pixels in ``mask``.

    Returns ``(rows, cols, power_dbm)`` for the feasible pixels only, with
    non-finite powers (empty STAR side) dropped. Matches :func:`ris_rx_power`
    gated by :func:`check_feasibility` pixel for pixel.
    """
    empty = (np.empty(0, dtype=np.intp), np.empty(0, dtype=np.intp), np.empty(0))
    if ris_level_reasons(s, ris, constraints):
        return empty
    g = s.grid
    res = g.resolution_m
    dmax = constraints.d_ris_ue_m[1]
    ri, rj = g.pixel_of(*ris.position)
    reach = int(math.ceil(dmax / res)) + 1
    i0, i1 = max(ri - reach, 0), min(ri + reach + 1, g.height_px)
    j0, j1 = max(rj - reach, 0), min(rj + reach + 1, g.width_px)
    sub = mask[i0:i1, j0:j1]
    rows, cols = np.nonzero(sub)
    rows = rows + i0
    cols = cols + j0
    x, y = g.pixel_center(rows, cols)
    drx = np.hypot(np.hypot(x - ris.position[0], y - ris.position[1]),
                   ris.height_m - s.ue.height_m)
    nx, ny = ris.normal
    front = (x - ris.position[0]) * nx + (y - ris.position[1]) * ny > 0
    keep = (drx >= constraints.d_ris_ue_m[0]) & (drx <= dmax)
    if ris.mode != STAR:
        keep &= front
    rows, cols, drx, front = rows[keep], cols[keep], drx[keep], front[keep]
    if rows.size == 0:
        return empty
    los = los_to_pixels(s.clutter, (*ris.position, ris.height_m), rows, cols, s.ue.height_m)
    rows, cols, drx, front = rows[los], cols[los], drx[los], front[los]

    split = np.where(front, 10.0 * math.log10(ris.beta_r),
                     10.0 * math.log10(1.0 - ris.beta_r) if ris.beta_r < 1 else -np.inf)
    d_tx = max(dtx(s, ris), 1.0)
    pl = ris_path_loss(s, ris, d_tx, np.maximum(drx, 1.0), s.ue.height_m)
    power = ris_budget_db(s, ris) + split - pl
    ok = np.isfinite(power)
    return rows[ok], cols[ok], power[ok]
