"""Independent oracles and small scene builders shared by the test modules."""
from collections import deque
from itertools import combinations
import math

import numpy as np

from risplan.scenario import (STAR, Carrier, ClutterGrid, Grid, RisUnit, Scenario, Site,
                              standard_carrier)


def make_scene(heights, res=5.0, band="3.5", sites=(), ris=(), origin=(0.0, 0.0)):
    """Scenario over an explicit height raster; ``sites`` are (id, (i, j)) or Site."""
    h = np.asarray(heights, dtype=np.float64)
    grid = Grid(h.shape[1], h.shape[0], float(res), origin)
    carrier = standard_carrier(band) if isinstance(band, str) else band
    out = []
    for st in sites:
        if isinstance(st, Site):
            out.append(st)
        else:
            sid, (i, j) = st[0], st[1]
            out.append(Site(sid, grid.pixel_center(i, j), carrier=carrier.band_id,
                            **(st[2] if len(st) > 2 else {})))
    return Scenario(ClutterGrid(grid, h), (carrier,), tuple(out), tuple(ris))


def open_scene(n=40, res=5.0, band="3.5", sites=(), ris=()):
    return make_scene(np.zeros((n, n)), res, band, sites, ris)


def make_ris(scene, ris_id, pixel, azimuth, donor, mode=STAR, beta_r=0.5, gain=15.0,
             loss=0.5, height=5.0):
    return RisUnit(ris_id, scene.grid.pixel_center(*pixel), height, azimuth, mode, beta_r,
                   gain, loss, donor)


def dense_los(heights, u0, v0, z0, u1, v1, z1, step=0.1, at_center=True):
    """
    Sample the segment every ``step`` pixels and test each cell it lands in.

    With ``at_center`` the cell is compared against the sight line at the
    projection of its center (the los_check contract); otherwise against
    the line height at the sample point itself.
    """
    nr, nc = heights.shape
    du, dv, dz = u1 - u0, v1 - v0, z1 - z0
    l2 = du * du + dv * dv
    length = math.sqrt(l2)
    n = max(int(math.ceil(length / step)), 1)
    for k in range(n + 1):
        t = k / n
        u = u0 + t * du
        v = v0 + t * dv
        c = min(max(int(math.floor(u)), 0), nc - 1)
        r = min(max(int(math.floor(v)), 0), nr - 1)
        if at_center and l2 > 0:
            tc = ((c + 0.5 - u0) * du + (r + 0.5 - v0) * dv) / l2
            tc = min(max(tc, 0.0), 1.0)
        elif at_center:
            tc = 0.0 if z0 <= z1 else 1.0
        else:
            tc = t
        if heights[r, c] >= z0 + tc * dz:
            return False
    return True


def flood_fill_components(mask):
    """4-connected components as a list of sorted pixel lists (BFS)."""
    mask = np.asarray(mask, dtype=bool)
    seen = np.zeros_like(mask)
    comps = []
    for i, j in zip(*np.nonzero(mask)):
        if seen[i, j]:
            continue
        q = deque([(i, j)])
        seen[i, j] = True
        comp = []
        while q:
            a, b = q.popleft()
            comp.append((int(a), int(b)))
            for da, db in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                x, y = a + da, b + db
                if 0 <= x < mask.shape[0] and 0 <= y < mask.shape[1] \
                        and mask[x, y] and not seen[x, y]:
                    seen[x, y] = True
                    q.append((x, y))
        comps.append(sorted(comp))
    return comps


def best_subset_cover(cover_sets, budget):
    """Exhaustive maximum coverage over all subsets of size <= budget."""
    sets = [set(map(int, c)) for c in cover_sets]
    best = 0
    for k in range(1, min(budget, len(sets)) + 1):
        for combo in combinations(sets, k):
            best = max(best, len(set().union(*combo)))
    return best


def carrier(band):
    return standard_carrier(band) if isinstance(band, str) else Carrier(*band)


def relaxed_constraints(band, **kw):
    """Limits wide enough that Manhattan facades see their donors."""
    from risplan.planner import default_constraints
    kw.setdefault("incidence_deg", (0.0, 90.0))
    kw.setdefault("d_bs_ris_m", (1.0, 150.0))
    return default_constraints(band, **kw)


def mmwave_scene(seed=3, n=80, n_sites=2):
    from risplan.scenario import SyntheticSpec, generate_synthetic
    spec = SyntheticSpec(width_px=n, height_px=n, n_sites=n_sites,
                         carrier=standard_carrier("28"))
    s = generate_synthetic(seed, spec)
    return s, s.carriers[0]


def scalar_cover_set(s, cand, dead_pixels, cutoff, c):
    """Dead pixels a candidate lifts to the cutoff, evaluated pixel by pixel."""
    from risplan.ris_channel import check_feasibility, ris_rx_power
    r = cand.to_ris("probe", c)
    w = s.grid.width_px
    out = set()
    for i, j in dead_pixels:
        px = (int(i), int(j))
        if check_feasibility(s, r, px, c).feasible and ris_rx_power(s, r, px) >= cutoff:
            out.add(px[0] * w + px[1])
    return out


def micro_instance(k):
    """
    Small random 28 GHz city with up to 8 candidates and a budget of 1..3.

    Returns (greedy newly covered pixels, exhaustive optimum, n candidates).
    """
    from risplan.coverage import compute_maps, detect_dead_zones
    from risplan.planner import generate_candidates, greedy_place
    from risplan.scenario import SyntheticSpec, generate_synthetic

    rng = np.random.default_rng(k)
    spec = SyntheticSpec(width_px=40, height_px=40, n_sites=1, carrier=standard_carrier("28"),
                         block_size_m=float(rng.choice([30, 40, 50])),
                         street_width_m=float(rng.choice([10, 15, 20])))
    s = generate_synthetic(k, spec)
    band = s.carriers[0]
    budget = int(rng.integers(1, 4))
    c = relaxed_constraints(band, max_ris=budget, target_coverage_prob=1.0,
                            d_ris_ue_m=(1.0, 40.0))
    cutoff = s.thresholds.deadzone_rsrp_dbm
    before = compute_maps(s, band, c)
    dz = detect_dead_zones(before.rsrp, cutoff, 0.0)
    cands = generate_candidates(s, band, dz, c)
    if not cands:
        return 0, 0, 0
    pick = sorted(rng.choice(len(cands), size=min(8, len(cands)), replace=False))
    sub = [cands[i] for i in pick]
    dead = np.argwhere(dz.mask())
    cover = [scalar_cover_set(s, cand, dead, cutoff, c) for cand in sub]
    res = greedy_place(s, band, dz, c, candidates=sub, before=before)
    greedy = int(round(sum(res.marginal_gains) / s.grid.pixel_area_m2))
    return greedy, best_subset_cover(cover, budget), len(sub)


ACCEPTANCE_LINES = []


def report_criterion(number, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok
