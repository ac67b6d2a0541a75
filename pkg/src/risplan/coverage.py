"""
Per-pixel coverage maps, dead-zone detection and coverage statistics.

Only street pixels (building height 0) are evaluated; building pixels are
masked out of every map and statistic.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import ndimage

from .propagation import site_pathloss
from .ris_channel import check_feasibility, ris_power_map, ris_rx_power
from .scenario import Grid

THERMAL_NOISE_DBM_HZ = -174.0
DEFAULT_ETA = 0.75
DEFAULT_SE_CAP = 7.8
DEFAULT_MIN_AREA_PX = 4
REL_EPS = 1e-9
CDF_POINTS_DB = tuple(float(x) for x in range(-10, 41))

RSRP_CLASSES = ("excellent", "good", "fair", "poor")
SINR_CLASSES = ("very_high", "high", "medium", "low")


class CoverageError(Exception):
    pass


@dataclass(frozen=True)
class ServerPath:
    site_id: str
    ris_id: Optional[str] = None

    @property
    def key(self):
        return (self.site_id, self.ris_id or "")

    @property
    def label(self):
        return self.site_id if self.ris_id is None else f"{self.site_id}/{self.ris_id}"


@dataclass(frozen=True, eq=False)
class RasterMap:
    grid: Grid
    values: np.ndarray
    mask: np.ndarray
    unit: str = ""

    def valid_values(self):
        return self.values[self.mask]


@dataclass(frozen=True, eq=False)
class MapSet:
    best_server: RasterMap
    rsrp: RasterMap
    sinr: RasterMap
    throughput: RasterMap
    server_paths: tuple = ()

    @property
    def grid(self):
        return self.rsrp.grid


@dataclass(frozen=True)
class DeadZone:
    rows: np.ndarray = field(repr=False, compare=False)
    cols: np.ndarray = field(repr=False, compare=False)
    area_m2: float = 0.0
    centroid: tuple = (0.0, 0.0)

    @property
    def n_pixels(self):
        return int(self.rows.size)


@dataclass(frozen=True)
class DeadZoneSet:
    grid: Grid
    zones: tuple
    total_area_m2: float

    def mask(self):
        m = np.zeros(self.grid.shape, dtype=bool)
        for z in self.zones:
            m[z.rows, z.cols] = True
        return m

    def summary(self):
        return {
            "count": len(self.zones),
            "total_area_m2": self.total_area_m2,
            "zones": [{"area_m2": z.area_m2, "n_pixels": z.n_pixels,
                       "centroid": [z.centroid[0], z.centroid[1]]} for z in self.zones],
        }


@dataclass(frozen=True)
class CoverageReport:
    grid: dict
    n_valid_pixels: int
    rsrp_class_fractions: dict
    sinr_class_fractions: dict
    covered_fraction: float
    mean_throughput_bps: float
    median_throughput_bps: float
    sinr_cdf: list
    thresholds: dict

    @property
    def good_excellent_fraction(self):
        return self.rsrp_class_fractions["excellent"] + self.rsrp_class_fractions["good"]

    def to_dict(self):
        return {
            "grid": dict(self.grid),
            "n_valid_pixels": self.n_valid_pixels,
            "rsrp_class_fractions": dict(self.rsrp_class_fractions),
            "sinr_class_fractions": dict(self.sinr_class_fractions),
            "good_excellent_fraction": self.good_excellent_fraction,
            "covered_fraction": self.covered_fraction,
            "mean_throughput_bps": self.mean_throughput_bps,
            "median_throughput_bps": self.median_throughput_bps,
            "sinr_cdf": [list(p) for p in self.sinr_cdf],
            "thresholds": dict(self.thresholds),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            grid=dict(d["grid"]),
            n_valid_pixels=int(d["n_valid_pixels"]),
            rsrp_class_fractions=dict(d["rsrp_class_fractions"]),
            sinr_class_fractions=dict(d["sinr_class_fractions"]),
            covered_fraction=float(d["covered_fraction"]),
            mean_throughput_bps=float(d["mean_throughput_bps"]),
            median_throughput_bps=float(d["median_throughput_bps"]),
            sinr_cdf=[tuple(p) for p in d["sinr_cdf"]],
            thresholds=dict(d["thresholds"]),
        )


@dataclass(frozen=True)
class DeltaReport:
    before: CoverageReport
    after: CoverageReport
    rsrp_class_change_pct: dict
    sinr_class_change_pct: dict
    good_excellent_change_pct: float
    covered_fraction_change_pct: float
    mean_throughput_change_pct: float
    before_deadzone_area_m2: float
    after_deadzone_area_m2: float
    deadzone_area_change_pct: float

    def to_dict(self):
        return {
            "before": self.before.to_dict(),
            "after": self.after.to_dict(),
            "rsrp_class_change_pct": dict(self.rsrp_class_change_pct),
            "sinr_class_change_pct": dict(self.sinr_class_change_pct),
            "good_excellent_change_pct": self.good_excellent_change_pct,
            "covered_fraction_change_pct": self.covered_fraction_change_pct,
            "mean_throughput_change_pct": self.mean_throughput_change_pct,
            "before_deadzone_area_m2": self.before_deadzone_area_m2,
            "after_deadzone_area_m2": self.after_deadzone_area_m2,
            "deadzone_area_change_pct": self.deadzone_area_change_pct,
        }


# ---------------------------------------------------------------------------
# link-level helpers

def noise_floor_dbm(bandwidth_mhz, noise_figure_db):
    """Thermal noise plus receiver noise figure over the carrier bandwidth."""
    return THERMAL_NOISE_DBM_HZ + 10.0 * math.log10(bandwidth_mhz * 1e6) + noise_figure_db


def dbm_to_mw(p):
    return np.power(10.0, np.divide(p, 10.0))


def throughput_bps(sinr_db, bandwidth_hz, eta=DEFAULT_ETA, se_cap=DEFAULT_SE_CAP):
    """Attenuated Shannon rate capped at ``se_cap`` bit/s/Hz."""
    sinr_lin = np.power(10.0, np.divide(sinr_db, 10.0))
    out = np.minimum(eta * bandwidth_hz * np.log2(1.0 + sinr_lin), se_cap * bandwidth_hz)
    return float(out) if np.ndim(out) == 0 else out


def _sites_on_band(s, band):
    sites = s.sites_on(band)
    if not sites:
        raise CoverageError(f"no site on band {band.band_id}")
    return sites


def _ris_on_band(s, band):
    ids = {st.site_id for st in s.sites_on(band)}
    return sorted((r for r in s.ris_units if r.donor_site in ids),
                  key=lambda r: (r.donor_site, r.ris_id))


def _constraints(band, constraints):
    if constraints is None:
        from .planner import default_constraints
        constraints = default_constraints(band)
    return constraints


def compute_rx_power(s, band, pixel, constraints=None):
    """
    Every candidate serving path at ``pixel`` with its received power (dBm).

    One direct entry per site on ``band`` and one per feasible RIS, sorted by
    power descending; ties by (site_id, ris_id) ascending.
    """
    constraints = _constraints(band, constraints)
    entries = []
    for st in _sites_on_band(s, band):
        pl = site_pathloss(s, st, pixel).pl_db
        entries.append((ServerPath(st.site_id), st.tx_power_dbm + st.antenna_gain_dbi - pl))
    for r in _ris_on_band(s, band):
        if check_feasibility(s, r, pixel, constraints).feasible:
            p = ris_rx_power(s, r, pixel)
            if math.isfinite(p):
                entries.append((ServerPath(r.donor_site, r.ris_id), p))
    entries.sort(key=lambda e: (-e[1], e[0].key))
    return entries


def _direct_power_maps(s, sites, mask):
    from .propagation import site_pathloss_map
    out = []
    for st in sites:
        pl, _ = site_pathloss_map(s, st, mask)
        out.append(st.tx_power_dbm + st.antenna_gain_dbi - pl)
    return out


def compute_maps(s, band, constraints=None, eta=DEFAULT_ETA, se_cap=DEFAULT_SE_CAP,
                 direct_maps=None):
    """
    Best server, RSRP, SINR and throughput rasters for ``band``.

    Parameters
    ----------
    s : Scenario
    band : Carrier
    constraints : PlacementConstraints, optional
        Geometry limits gating RIS paths; per-band defaults when omitted.
    direct_maps : list of ndarray, optional
        Precomputed direct-path power maps (site_id order); reused by the
        planner so the baseline is computed once.
    """
    constraints = _constraints(band, constraints)
    g = s.grid
    mask = s.clutter.street_mask
    sites = _sites_on_band(s, band)
    if direct_maps is None:
        direct_maps = _direct_power_maps(s, sites, mask)
    site_index = {st.site_id: k for k, st in enumerate(sites)}

    # candidate paths in ascending (site_id, ris_id) order; strict > keeps the
    # smallest key on ties
    paths = [(ServerPath(st.site_id), ("map", k)) for k, st in enumerate(sites)]
    ris_list = _ris_on_band(s, band)
    ris_samples = {}
    for r in ris_list:
        ris_samples[r.ris_id] = ris_power_map(s, r, constraints, mask)
        paths.append((ServerPath(r.donor_site, r.ris_id), ("ris", r.ris_id)))
    paths.sort(key=lambda p: p[0].key)

    best = np.full(g.shape, -np.inf)
    best_idx = np.full(g.shape, -1, dtype=np.int32)
    for idx, (path, (kind, ref)) in enumerate(paths):
        if kind == "map":
            p = direct_maps[ref]
            upd = mask & (p > best)
            best[upd] = p[upd]
            best_idx[upd] = idx
        else:
            rows, cols, pw = ris_samples[ref]
            if rows.size == 0:
                continue
            upd = pw > best[rows, cols]
            best[rows[upd], cols[upd]] = pw[upd]
            best_idx[rows[upd], cols[upd]] = idx

    noise_mw = dbm_to_mw(noise_floor_dbm(band.bandwidth_mhz, s.ue.noise_figure_db))
    serving_site = np.full(g.shape, -1, dtype=np.int32)
    path_site = np.array([site_index[p.site_id] for p, _ in paths], dtype=np.int32)
    serving_site[mask] = path_site[best_idx[mask]]
    interference = np.zeros(g.shape)
    for k, p in enumerate(direct_maps):
        contrib = np.where(serving_site == k, 0.0, dbm_to_mw(np.where(mask, p, -np.inf)))
        interference = interference + contrib
    sinr = np.full(g.shape, np.nan)
    rsrp = np.full(g.shape, np.nan)
    rsrp[mask] = best[mask]
    sinr[mask] = 10.0 * np.log10(dbm_to_mw(best[mask]) / (interference[mask] + noise_mw))
    tput = np.full(g.shape, np.nan)
    tput[mask] = throughput_bps(sinr[mask], band.bandwidth_hz, eta, se_cap)
    server = np.where(mask, best_idx, -1)

    m = mask.copy()
    m.setflags(write=False)
    return MapSet(
        best_server=RasterMap(g, server, m, "server index"),
        rsrp=RasterMap(g, rsrp, m, "dBm"),
        sinr=RasterMap(g, sinr, m, "dB"),
        throughput=RasterMap(g, tput, m, "bps"),
        server_paths=tuple(p for p, _ in paths),
    )


# ---------------------------------------------------------------------------
# dead zones and statistics

_FOUR = ndimage.generate_binary_structure(2, 1)


def detect_dead_zones(rsrp, cutoff_dbm, min_area_m2=None):
    """
    4-connected components of valid pixels with RSRP below ``cutoff_dbm``.

    Components smaller than ``min_area_m2`` (default four pixels) are
    dropped. Zones are ordered by area descending, then by centroid.
    """
    g = rsrp.grid
    px = g.pixel_area_m2
    if min_area_m2 is None:
        min_area_m2 = DEFAULT_MIN_AREA_PX * px
    below = rsrp.mask & (np.nan_to_num(rsrp.values, nan=np.inf) < cutoff_dbm)
    labels, n = ndimage.label(below, structure=_FOUR)
    zones = []
    if n:
        objs = ndimage.find_objects(labels)
        for lab, sl in enumerate(objs, start=1):
            rr, cc = np.nonzero(labels[sl] == lab)
            rr = rr + sl[0].start
            cc = cc + sl[1].start
            area = rr.size * px
            if area < min_area_m2:
                continue
            zones.append(DeadZone(rr, cc, area, (float(rr.mean()), float(cc.mean()))))
    zones.sort(key=lambda z: (-z.area_m2, z.centroid[0], z.centroid[1]))
    return DeadZoneSet(g, tuple(zones), float(sum(z.area_m2 for z in zones)))


def _classify(values, bounds):
    """Class index 0..3 per value for strictly decreasing ``bounds``."""
    b = np.asarray(bounds, dtype=np.float64)
    # count how many bounds lie strictly above the value
    return np.sum(values[:, None] < b[None, :], axis=1)


def class_fractions(values, bounds, names):
    n = values.size
    if n == 0:
        return {k: 0.0 for k in names}
    counts = np.bincount(_classify(values, bounds), minlength=len(names))
    return {k: float(counts[i]) / n for i, k in enumerate(names)}


def coverage_stats(maps, t):
    """Class fractions, coverage probability, throughput summary and SINR CDF."""
    rsrp = maps.rsrp.valid_values()
    sinr = maps.sinr.valid_values()
    tput = maps.throughput.valid_values()
    n = rsrp.size
    g = maps.grid
    cdf = [(x, float(np.count_nonzero(sinr <= x)) / n if n else 0.0) for x in CDF_POINTS_DB]
    return CoverageReport(
        grid={"width_px": g.width_px, "height_px": g.height_px,
              "resolution_m": g.resolution_m, "origin": [g.origin[0], g.origin[1]]},
        n_valid_pixels=int(n),
        rsrp_class_fractions=class_fractions(rsrp, t.rsrp_class_bounds_dbm, RSRP_CLASSES),
        sinr_class_fractions=class_fractions(sinr, t.sinr_class_bounds_db, SINR_CLASSES),
        covered_fraction=float(np.count_nonzero(rsrp >= t.deadzone_rsrp_dbm)) / n if n else 0.0,
        mean_throughput_bps=float(np.mean(tput)) if n else 0.0,
        median_throughput_bps=float(np.median(tput)) if n else 0.0,
        sinr_cdf=cdf,
        thresholds={"rsrp_class_bounds_dbm": list(t.rsrp_class_bounds_dbm),
                    "sinr_class_bounds_db": list(t.sinr_class_bounds_db),
                    "deadzone_rsrp_dbm": t.deadzone_rsrp_dbm,
                    "target_coverage_prob": t.target_coverage_prob},
    )


def relative_change_pct(before, after):
    if before == after:
        return 0.0
    return (after - before) / max(before, REL_EPS) * 100.0


def compare(before, before_dz, after, after_dz):
    """
    Relative before/after changes.

    ``before_dz`` / ``after_dz`` are :class:`DeadZoneSet` objects or plain
    total areas in square meters.
    """
    if before.grid != after.grid:
        raise CoverageError(f"grid mismatch: {before.grid} vs {after.grid}")
    if before.thresholds != after.thresholds:
        raise CoverageError("threshold mismatch between reports")
    a0 = before_dz.total_area_m2 if isinstance(before_dz, DeadZoneSet) else float(before_dz)
    a1 = after_dz.total_area_m2 if isinstance(after_dz, DeadZoneSet) else float(after_dz)
    return DeltaReport(
        before=before,
        after=after,
        rsrp_class_change_pct={k: relative_change_pct(before.rsrp_class_fractions[k],
                                                      after.rsrp_class_fractions[k])
                               for k in RSRP_CLASSES},
        sinr_class_change_pct={k: relative_change_pct(before.sinr_class_fractions[k],
                                                      after.sinr_class_fractions[k])
                               for k in SINR_CLASSES},
        good_excellent_change_pct=relative_change_pct(before.good_excellent_fraction,
                                                      after.good_excellent_fraction),
        covered_fraction_change_pct=relative_change_pct(before.covered_fraction,
                                                        after.covered_fraction),
        mean_throughput_change_pct=relative_change_pct(before.mean_throughput_bps,
                                                       after.mean_throughput_bps),
        before_deadzone_area_m2=a0,
        after_deadzone_area_m2=a1,
        deadzone_area_change_pct=relative_change_pct(a0, a1),
    )
