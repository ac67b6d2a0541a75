"""
RIS dimensioning, facade candidate generation and greedy placement.

The placement loop is a greedy maximum-coverage heuristic: every step
re-scores all remaining candidates against the pixels that are still dead
and installs the one that revives the most of them.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from scipy import ndimage

from .coverage import (MapSet, compare, compute_maps, coverage_stats, detect_dead_zones,
                       _direct_power_maps, _sites_on_band)
from .propagation import los_check
from .ris_channel import incidence_angle, ris_power_map
from .scenario import REFLECT, STAR, RisUnit

log = logging.getLogger(__name__)

HEX_AREA_FACTOR = 3.0 * math.sqrt(3.0) / 2.0

# facade normal azimuths (clockwise from north) and the pixel offset of the
# building behind a street pixel facing that way
_FACADES = ((0.0, (1, 0)), (90.0, (0, -1)), (180.0, (-1, 0)), (270.0, (0, 1)))


@dataclass(frozen=True)
class PlacementConstraints:
    d_bs_ris_m: tuple
    d_ris_ue_m: tuple
    incidence_deg: tuple
    ris_height_m: float = 5.0
    ris_gain_db: float = 15.0
    ris_reflection_loss_db: float = 0.5
    mode: str = STAR
    beta_r: float = 0.5
    target_coverage_prob: float = 0.95
    max_ris: int = 11

    def __post_init__(self):
        for name in ("d_bs_ris_m", "d_ris_ue_m", "incidence_deg"):
            lo, hi = getattr(self, name)
            if not lo <= hi:
                raise ValueError(f"{name} range is empty: {(lo, hi)}")
        if not 0 < self.target_coverage_prob <= 1:
            raise ValueError("target_coverage_prob must be in (0, 1]")
        if self.mode not in (REFLECT, STAR):
            raise ValueError(f"unknown RIS mode {self.mode!r}")
        if not 0 < self.beta_r <= 1 or (self.mode == REFLECT and self.beta_r != 1):
            raise ValueError("beta_r must be in (0, 1] and equal 1 for reflect-only")
        if self.max_ris < 0:
            raise ValueError("max_ris must be >= 0")


def default_constraints(band, **overrides):
    """Per-band planning limits (sub-6 GHz vs mmWave)."""
    if band.is_mmwave:
        c = PlacementConstraints(d_bs_ris_m=(50.0, 75.0), d_ris_ue_m=(1.0, 75.0),
                                 incidence_deg=(10.0, 60.0), ris_height_m=5.0,
                                 ris_gain_db=26.0, ris_reflection_loss_db=2.865,
                                 max_ris=142)
    else:
        c = PlacementConstraints(d_bs_ris_m=(100.0, 200.0), d_ris_ue_m=(1.0, 75.0),
                                 incidence_deg=(15.0, 45.0), ris_height_m=5.0,
                                 ris_gain_db=15.0, ris_reflection_loss_db=0.5,
                                 max_ris=11)
    if overrides.get("mode") == REFLECT and "beta_r" not in overrides:
        overrides["beta_r"] = 1.0
    return replace(c, **overrides)


@dataclass
class RisCandidate:
    pixel: tuple
    position: tuple
    normal_azimuth_deg: float
    donor_site: str
    last_score: int = 0

    def to_ris(self, ris_id, c):
        return RisUnit(
            ris_id=ris_id,
            position=self.position,
            height_m=c.ris_height_m,
            normal_azimuth_deg=self.normal_azimuth_deg,
            mode=c.mode,
            beta_r=c.beta_r,
            gain_db=c.ris_gain_db,
            reflection_loss_db=c.ris_reflection_loss_db,
            donor_site=self.donor_site,
        )


@dataclass
class PlacementResult:
    placed: list
    marginal_gains: list
    achieved_coverage_prob: float
    initial_coverage_prob: float
    before: Optional[MapSet] = None
    after: Optional[MapSet] = None
    newly_covered_pixels: int = 0
    median_uplift_db: Optional[float] = None
    scores: list = field(default_factory=list)

    def to_dict(self):
        from .scenario import ris_to_dict
        return {
            "placed": [ris_to_dict(r) for r in self.placed],
            "marginal_gains": list(self.marginal_gains),
            "achieved_coverage_prob": self.achieved_coverage_prob,
            "initial_coverage_prob": self.initial_coverage_prob,
            "newly_covered_pixels": self.newly_covered_pixels,
            "median_uplift_db": self.median_uplift_db,
        }


@dataclass
class PipelineResult:
    band: object
    constraints: PlacementConstraints
    before: MapSet
    before_report: object
    before_deadzones: object
    candidates: list
    placement: PlacementResult
    after_scenario: object
    after: MapSet
    after_report: object
    after_deadzones: object
    delta: object


def estimate_min_ris(area_m2, cell_radius_m):
    """Hexagonal dimensioning: ceil(area / ((3*sqrt(3)/2) * r**2))."""
    if area_m2 <= 0 or cell_radius_m <= 0:
        raise ValueError("area and cell radius must be positive")
    n = area_m2 / (HEX_AREA_FACTOR * cell_radius_m ** 2)
    # absorb float noise so an exact multiple of the hex area is not bumped up
    return max(1, int(math.ceil(n - 1e-9)))


def _donor_for(s, sites, pixel_xy, normal_az, c):
    probe = RisUnit("probe", pixel_xy, c.ris_height_m, normal_az, c.mode, c.beta_r,
                    c.ris_gain_db, c.ris_reflection_loss_db, "")
    ranked = []
    for st in sites:
        d = math.hypot(math.hypot(st.position[0] - pixel_xy[0], st.position[1] - pixel_xy[1]),
                       st.height_m - c.ris_height_m)
        ranked.append((d, st.site_id, st))
    ranked.sort(key=lambda t: (t[0], t[1]))
    for d, _, st in ranked:
        if not c.d_bs_ris_m[0] <= d <= c.d_bs_ris_m[1]:
            continue
        if st.position[0] == pixel_xy[0] and st.position[1] == pixel_xy[1]:
            continue
        if not c.incidence_deg[0] <= incidence_angle(st, probe) <= c.incidence_deg[1]:
            continue
        if not los_check(s.clutter, (*st.position, st.height_m), (*pixel_xy, c.ris_height_m)):
            continue
        return st.site_id
    return None


def generate_candidates(s, band, dz, c):
    """
    Facade-mounted RIS candidates near the dead zones.

    A candidate is a street pixel within ``c.d_ris_ue_m`` max of some dead
    pixel whose 4-neighbour is a building; one candidate per such facade,
    facing into the street. The donor is the nearest site that satisfies the
    BS->RIS distance, incidence and LOS constraints; candidates without one
    are dropped.
    """
    g = s.grid
    if not dz.zones:
        return []
    street = s.clutter.street_mask
    dead = dz.mask()
    reach_px = c.d_ris_ue_m[1] / g.resolution_m
    dist = ndimage.distance_transform_edt(~dead)
    near = street & (dist <= reach_px)
    sites = _sites_on_band(s, band)
    building = ~street
    H, W = g.shape
    out = []
    for i, j in zip(*np.nonzero(near)):
        for az, (di, dj) in _FACADES:
            bi, bj = i + di, j + dj
            if not (0 <= bi < H and 0 <= bj < W) or not building[bi, bj]:
                continue
            xy = g.pixel_center(int(i), int(j))
            donor = _donor_for(s, sites, xy, az, c)
            if donor is not None:
                out.append(RisCandidate((int(i), int(j)), xy, az, donor))
    return out


def coverable_pixels(s, cand, dead_mask, cutoff_dbm, c):
    """Flat indices of dead pixels the candidate alone lifts to >= cutoff."""
    ris = cand.to_ris("candidate", c)
    rows, cols, pw = ris_power_map(s, ris, c, dead_mask)
    ok = pw >= cutoff_dbm
    return np.ravel_multi_index((rows[ok], cols[ok]), s.grid.shape)


def score_candidate(s, cand, dz, cutoff_dbm, c):
    """Number of dead-zone pixels revived by adding ``cand`` on its own."""
    n = int(coverable_pixels(s, cand, dz.mask(), cutoff_dbm, c).size)
    cand.last_score = n
    return n


def greedy_select(cover_sets, budget, stop_when=None):
    """
    Greedy maximum coverage over precomputed sets of pixel indices.

    Returns the chosen indices and the marginal gain of each pick. Ties go
    to the lowest index; stops on zero gain, exhausted budget, or when
    ``stop_when(total_covered)`` is true.
    """
    covered = set()
    remaining = [set(map(int, cs)) for cs in cover_sets]
    chosen, gains = [], []
    total = 0
    while len(chosen) < budget:
        if stop_when is not None and stop_when(total):
            break
        best_k, best_gain = -1, 0
        for k, cs in enumerate(remaining):
            if k in chosen:
                continue
            gain = len(cs - covered)
            if gain > best_gain:
                best_k, best_gain = k, gain
        if best_gain == 0:
            break
        chosen.append(best_k)
        gains.append(best_gain)
        covered |= remaining[best_k]
        total += best_gain
    return chosen, gains


def _next_ris_ids(s, n):
    taken = {r.ris_id for r in s.ris_units}
    ids, k = [], 1
    while len(ids) < n:
        rid = f"RIS{k:03d}"
        if rid not in taken:
            ids.append(rid)
        k += 1
    return ids


def greedy_place(s, band, dz, c, candidates=None, before=None, direct_maps=None):
    """
    Place RIS greedily until the target coverage, the budget or zero gain.

    The after-state maps are computed once, with all placed RIS.
    """
    cutoff = s.thresholds.deadzone_rsrp_dbm
    if before is None:
        before = compute_maps(s, band, c, direct_maps=direct_maps)
    rsrp = before.rsrp
    n_valid = int(np.count_nonzero(rsrp.mask))
    n_below = int(np.count_nonzero(rsrp.mask & (np.nan_to_num(rsrp.values, nan=np.inf) < cutoff)))
    initial = 1.0 - n_below / n_valid if n_valid else 1.0
    if candidates is None:
        candidates = generate_candidates(s, band, dz, c) if dz.zones else []

    dead_mask = dz.mask()
    cover = [coverable_pixels(s, cand, dead_mask, cutoff, c) for cand in candidates]
    for cand, cs in zip(candidates, cover):
        cand.last_score = int(cs.size)
    target_missing = c.target_coverage_prob * n_valid

    def reached(total):
        return n_valid - n_below + total >= target_missing

    chosen, gains = greedy_select(cover, c.max_ris, stop_when=reached)
    ids = _next_ris_ids(s, len(chosen))
    placed = [candidates[k].to_ris(rid, c) for k, rid in zip(chosen, ids)]
    px = s.grid.pixel_area_m2
    achieved = 1.0 - (n_below - sum(gains)) / n_valid if n_valid else 1.0
    log.info("placed %d RIS, coverage %.4f -> %.4f", len(placed), initial, achieved)

    after = before
    newly, uplift = 0, None
    if placed:
        after = compute_maps(s.with_ris(placed), band, c, direct_maps=direct_maps)
        m = rsrp.mask
        b = np.where(m, rsrp.values, np.inf)
        a = np.where(m, after.rsrp.values, -np.inf)
        revived = (b < cutoff) & (a >= cutoff)
        newly = int(np.count_nonzero(revived))
        if newly:
            uplift = float(np.median(a[revived] - b[revived]))
    return PlacementResult(
        placed=placed,
        marginal_gains=[gn * px for gn in gains],
        achieved_coverage_prob=achieved,
        initial_coverage_prob=initial,
        before=before,
        after=after,
        newly_covered_pixels=newly,
        median_uplift_db=uplift,
        scores=[candidates[k].last_score for k in chosen],
    )


def run_pipeline(s, band, c=None, min_area_m2=None):
    """
    Plan -> simulate -> detect dead zones -> place RIS -> re-simulate -> compare.
    """
    if c is None:
        c = default_constraints(band)
    t = s.thresholds
    sites = _sites_on_band(s, band)
    direct = _direct_power_maps(s, sites, s.clutter.street_mask)
    before = compute_maps(s, band, c, direct_maps=direct)
    before_report = coverage_stats(before, t)
    before_dz = detect_dead_zones(before.rsrp, t.deadzone_rsrp_dbm, min_area_m2)
    candidates = generate_candidates(s, band, before_dz, c)
    log.info("%d dead zones (%.0f m2), %d candidates", len(before_dz.zones),
             before_dz.total_area_m2, len(candidates))
    placement = greedy_place(s, band, before_dz, c, candidates, before, direct)
    after_s = s.with_ris(placement.placed)
    after = placement.after
    after_report = coverage_stats(after, t)
    after_dz = detect_dead_zones(after.rsrp, t.deadzone_rsrp_dbm, min_area_m2)
    delta = compare(before_report, before_dz, after_report, after_dz)
    return PipelineResult(band, c, before, before_report, before_dz, candidates, placement,
                          after_s, after, after_report, after_dz, delta)
