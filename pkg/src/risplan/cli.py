"""
Command-line front end.

Exit codes: 0 success, 2 usage error, 3 data/validation error,
4 internal invariant breach. ``RISPLAN_LOG`` sets log verbosity only.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from ._kernels import set_threads
from .coverage import (CoverageError, CoverageReport, compare, compute_maps,
                       coverage_stats, detect_dead_zones)
from .export import dump_json, write_raster
from .planner import default_constraints, run_pipeline, generate_candidates, greedy_place
from .scenario import (REFLECT, STAR, ScenarioError, SyntheticSpec, ValidationError,
                       generate_synthetic, load_scenario_file, ris_to_dict, save_scenario,
                       scenario_digest, standard_carrier)

log = logging.getLogger("risplan")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 2, 3, 4
FORMATS = ("csv", "pgm", "png", "json")


class InvariantError(Exception):
    pass


# ---------------------------------------------------------------------------
# argument helpers

def _pair(text):
    try:
        a, b = (float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected MIN,MAX, got {text!r}")
    if a > b:
        raise argparse.ArgumentTypeError(f"empty range {text!r}")
    return (a, b)


def _dims(text):
    try:
        w, h = (int(v) for v in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected WxH, got {text!r}")
    if w < 1 or h < 1:
        raise argparse.ArgumentTypeError("grid dimensions must be >= 1")
    return (w, h)


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return v


def _nonneg_int(text):
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {v}")
    return v


def _positive_float(text):
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError(f"must be > 0, got {v}")
    return v


def _formats(text):
    items = [f.strip() for f in text.split(",") if f.strip()]
    bad = [f for f in items if f not in FORMATS]
    if bad:
        raise argparse.ArgumentTypeError(f"unknown format(s) {bad}; choose from {FORMATS}")
    return tuple(items)


def _common(p, scenario=True):
    if scenario:
        p.add_argument("--scenario", required=True, type=Path, help="scenario JSON document")
        p.add_argument("--band", default=None, help="3.5, 28 or a band_id")
        p.add_argument("--cutoff-dbm", type=float, default=None,
                       help="override the dead-zone RSRP cutoff")
        p.add_argument("--min-area", type=float, default=None,
                       help="smallest dead zone kept (m2); default four pixels")
    p.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    p.add_argument("--formats", type=_formats, default=("csv", "json"),
                   help="comma list of csv,pgm,png,json")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=_positive_int, default=1,
                   help="kernel threads; never changes any output byte")


def _placement_flags(p):
    p.add_argument("--max-ris", type=_nonneg_int, default=None)
    p.add_argument("--target-cov", type=float, default=None)
    p.add_argument("--mode", choices=(REFLECT, STAR), default=None)
    p.add_argument("--beta-r", type=float, default=None)
    p.add_argument("--ris-gain", type=float, default=None, help="RIS gain (dB)")
    p.add_argument("--ris-loss", type=float, default=None, help="RIS reflection loss (dB)")
    p.add_argument("--ris-height", type=_positive_float, default=None)
    p.add_argument("--d-bs-ris", type=_pair, default=None, metavar="MIN,MAX")
    p.add_argument("--d-ris-ue", type=_pair, default=None, metavar="MIN,MAX")
    p.add_argument("--incidence", type=_pair, default=None, metavar="MIN,MAX")


def build_parser():
    parser = argparse.ArgumentParser(prog="risplan", description=__doc__.strip().splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a synthetic Manhattan-grid scenario")
    _common(g, scenario=False)
    g.add_argument("--grid", type=_dims, default=(520, 520), metavar="WxH")
    g.add_argument("--res", type=_positive_float, default=5.0, help="meters per pixel")
    g.add_argument("--sites", type=_positive_int, default=8)
    g.add_argument("--band", default="3.5", help="3.5 or 28")
    g.add_argument("--block", type=_positive_float, default=50.0, help="block size (m)")
    g.add_argument("--street", type=_positive_float, default=20.0, help="street width (m)")
    g.add_argument("--heights", type=_pair, default=(10.0, 40.0), metavar="MIN,MAX")
    g.add_argument("--tx-power", type=float, default=None, help="site Tx power (dBm)")
    g.add_argument("--antenna-gain", type=float, default=None, help="site antenna gain (dBi)")
    g.add_argument("--clutter-pgm", action="store_true",
                   help="store the clutter raster as a PGM file next to the document")

    for name, helptext in (("simulate", "coverage, quality and capacity maps"),
                           ("deadzones", "detect dead zones"),
                           ("place-ris", "greedy RIS placement"),
                           ("pipeline", "full plan -> place -> re-simulate -> compare")):
        p = sub.add_parser(name, help=helptext)
        _common(p)
        _placement_flags(p)

    c = sub.add_parser("compare", help="delta between two report JSON files")
    c.add_argument("--before", type=Path, required=True)
    c.add_argument("--after", type=Path, required=True)
    c.add_argument("--out", type=Path, default=None)
    return parser


# ---------------------------------------------------------------------------
# shared steps

def _load(args):
    s = load_scenario_file(args.scenario)
    if args.cutoff_dbm is not None:
        s = replace(s, thresholds=replace(s.thresholds, deadzone_rsrp_dbm=args.cutoff_dbm))
    if args.band is None:
        if len(s.carriers) != 1:
            raise ScenarioError("scenario has several carriers; pass --band")
        band = s.carriers[0]
    else:
        try:
            band = s.carrier(args.band)
        except KeyError as e:
            raise ScenarioError(str(e.args[0]), "--band") from e
    if not s.sites_on(band):
        raise ScenarioError(f"no site on band {band.band_id}", "--band")
    return s, band


def _constraints(args, s, band):
    over = {}
    for flag, name in (("max_ris", "max_ris"), ("mode", "mode"), ("beta_r", "beta_r"),
                       ("ris_gain", "ris_gain_db"), ("ris_loss", "ris_reflection_loss_db"),
                       ("ris_height", "ris_height_m"), ("d_bs_ris", "d_bs_ris_m"),
                       ("d_ris_ue", "d_ris_ue_m"), ("incidence", "incidence_deg")):
        v = getattr(args, flag, None)
        if v is not None:
            over[name] = v
    target = getattr(args, "target_cov", None)
    over["target_coverage_prob"] = target if target is not None else s.thresholds.target_coverage_prob
    try:
        return default_constraints(band, **over)
    except ValueError as e:
        raise ScenarioError(str(e), "constraints") from e


def _band_dict(band):
    return {"band_id": band.band_id, "center_freq_ghz": band.center_freq_ghz,
            "bandwidth_mhz": band.bandwidth_mhz}


def _state(report, dz):
    return {"coverage": report.to_dict(), "deadzones": dz.summary()}


def _write_mapset(maps, s, out, prefix, formats):
    legend = {str(k): p.label for k, p in enumerate(maps.server_paths)}
    for name, raster in (("rsrp", maps.rsrp), ("sinr", maps.sinr),
                         ("throughput", maps.throughput), ("best_server", maps.best_server)):
        extra = {"legend": legend} if name == "best_server" else None
        write_raster(raster, out, f"{prefix}{name}", formats, extra)
    if "png" in formats:
        from .plotting import render_mapset
        render_mapset(maps, s.thresholds, out, prefix)


def _check_report(report):
    for fr in (report.rsrp_class_fractions, report.sinr_class_fractions):
        if abs(sum(fr.values()) - 1.0) > 1e-9 and report.n_valid_pixels:
            raise InvariantError(f"class fractions sum to {sum(fr.values())}")
    if not 0.0 <= report.covered_fraction <= 1.0:
        raise InvariantError("covered fraction outside [0, 1]")


def _check_monotone(before, after):
    m = before.rsrp.mask
    if np.any(after.rsrp.values[m] < before.rsrp.values[m]):
        raise InvariantError("adding RIS lowered RSRP somewhere")


def _report_doc(s, band, before=None, after=None, placement=None, delta=None):
    return {
        "scenario_digest": scenario_digest(s),
        "band": _band_dict(band),
        "before": before,
        "after": after,
        "placement": placement,
        "delta": delta,
    }


# ---------------------------------------------------------------------------
# subcommands

def cmd_generate(args):
    try:
        carrier = standard_carrier(args.band)
    except KeyError as e:
        return _usage(str(e.args[0]))
    spec = SyntheticSpec(width_px=args.grid[0], height_px=args.grid[1], resolution_m=args.res,
                         block_size_m=args.block, street_width_m=args.street,
                         building_height_range_m=args.heights, n_sites=args.sites,
                         carrier=carrier)
    if args.tx_power is not None:
        spec = replace(spec, tx_power_dbm=args.tx_power)
    if args.antenna_gain is not None:
        spec = replace(spec, antenna_gain_dbi=args.antenna_gain)
    try:
        s = generate_synthetic(args.seed, spec)
    except ValueError as e:
        return _usage(str(e))
    out = args.out
    path = out if out.suffix == ".json" else out / "scenario.json"
    path.parent.mkdir(parents=True, exist_ok=True)
    clutter_file = None
    if args.clutter_pgm:
        from .scenario import clutter_pgm
        clutter_file = path.with_suffix(".clutter.pgm").name
        (path.parent / clutter_file).write_text(clutter_pgm(s.clutter))
    path.write_text(save_scenario(s, clutter_file))
    g = s.grid
    print(f"wrote {path}: grid {g.width_px}x{g.height_px} @ {g.resolution_m:g} m, "
          f"area {g.area_m2 / 1e6:.4f} km2, {len(s.sites)} sites on {carrier.band_id}")
    return EXIT_OK


def cmd_simulate(args):
    s, band = _load(args)
    c = _constraints(args, s, band)
    args.out.mkdir(parents=True, exist_ok=True)
    maps = compute_maps(s, band, c)
    report = coverage_stats(maps, s.thresholds)
    _check_report(report)
    dz = detect_dead_zones(maps.rsrp, s.thresholds.deadzone_rsrp_dbm, args.min_area)
    _write_mapset(maps, s, args.out, "", args.formats)
    (args.out / "report.json").write_text(dump_json(_report_doc(s, band, _state(report, dz))))
    print(f"simulated {band.band_id}: covered {report.covered_fraction:.4f}, "
          f"good+excellent {report.good_excellent_fraction:.4f}, "
          f"dead zones {len(dz.zones)} ({dz.total_area_m2 / 1e6:.4f} km2)")
    return EXIT_OK


def cmd_deadzones(args):
    s, band = _load(args)
    c = _constraints(args, s, band)
    args.out.mkdir(parents=True, exist_ok=True)
    maps = compute_maps(s, band, c)
    dz = detect_dead_zones(maps.rsrp, s.thresholds.deadzone_rsrp_dbm, args.min_area)
    from .coverage import RasterMap
    mask = RasterMap(maps.grid, dz.mask().astype(np.int64), maps.rsrp.mask, "dead (1) / live (0)")
    write_raster(mask, args.out, "deadzones", args.formats)
    if "png" in args.formats:
        from .plotting import plot_deadzones
        plot_deadzones(maps.rsrp, dz, args.out / "deadzones.png", s.sites_on(band), s.ris_units)
    (args.out / "deadzones.json").write_text(dump_json(
        {"scenario_digest": scenario_digest(s), "band": _band_dict(band),
         "cutoff_dbm": s.thresholds.deadzone_rsrp_dbm, **dz.summary()}))
    print(f"{len(dz.zones)} dead zones, {dz.total_area_m2 / 1e6:.4f} km2")
    return EXIT_OK


def _write_placement(s_after, placed, out):
    (out / "placed_ris.json").write_text(
        json.dumps({"ris_units": [ris_to_dict(r) for r in placed]}, indent=1) + "\n")
    (out / "after_scenario.json").write_text(save_scenario(s_after))


def cmd_place_ris(args):
    s, band = _load(args)
    c = _constraints(args, s, band)
    args.out.mkdir(parents=True, exist_ok=True)
    before = compute_maps(s, band, c)
    dz = detect_dead_zones(before.rsrp, s.thresholds.deadzone_rsrp_dbm, args.min_area)
    cands = generate_candidates(s, band, dz, c)
    res = greedy_place(s, band, dz, c, cands, before)
    _check_monotone(before, res.after)
    s_after = s.with_ris(res.placed)
    _write_placement(s_after, res.placed, args.out)
    (args.out / "placement.json").write_text(dump_json(
        {"scenario_digest": scenario_digest(s), "band": _band_dict(band),
         "n_candidates": len(cands), **res.to_dict()}))
    print(f"placed {len(res.placed)} RIS from {len(cands)} candidates; coverage "
          f"{res.initial_coverage_prob:.4f} -> {res.achieved_coverage_prob:.4f}")
    return EXIT_OK


def cmd_pipeline(args):
    s, band = _load(args)
    c = _constraints(args, s, band)
    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    r = run_pipeline(s, band, c, args.min_area)
    _check_report(r.before_report)
    _check_report(r.after_report)
    _check_monotone(r.before, r.after)
    if r.after_deadzones.total_area_m2 > r.before_deadzones.total_area_m2:
        raise InvariantError("dead-zone area grew after placement")
    _write_mapset(r.before, s, out, "before_", args.formats)
    _write_mapset(r.after, r.after_scenario, out, "after_", args.formats)
    _write_placement(r.after_scenario, r.placement.placed, out)
    placement = {"n_candidates": len(r.candidates), **r.placement.to_dict()}
    doc = _report_doc(s, band, _state(r.before_report, r.before_deadzones),
                      _state(r.after_report, r.after_deadzones), placement, r.delta.to_dict())
    (out / "report.json").write_text(dump_json(doc))
    if "png" in args.formats:
        from .plotting import plot_deadzones, plot_sinr_cdf
        plot_deadzones(r.before.rsrp, r.before_deadzones, out / "before_deadzones.png",
                       s.sites_on(band), (), "Dead zones before")
        plot_deadzones(r.after.rsrp, r.after_deadzones, out / "after_deadzones.png",
                       s.sites_on(band), r.placement.placed, "Dead zones after")
        plot_sinr_cdf([r.before_report, r.after_report], ["without RIS", "with RIS"],
                      out / "sinr_cdf.png")
    d = r.delta
    print(f"placed {len(r.placement.placed)}, dead-zone change {d.deadzone_area_change_pct:+.2f}%, "
          f"good+excellent change {d.good_excellent_change_pct:+.2f}%")
    return EXIT_OK


def _read_state(path):
    try:
        doc = json.loads(Path(path).read_text())
        state = doc["after"] if doc.get("after") else doc["before"]
        return (doc, CoverageReport.from_dict(state["coverage"]),
                float(state["deadzones"]["total_area_m2"]))
    except (OSError, ValueError, KeyError, TypeError) as e:
        raise ScenarioError(f"cannot read report {path}: {e}") from e


def cmd_compare(args):
    doc_b, rep_b, dz_b = _read_state(args.before)
    doc_a, rep_a, dz_a = _read_state(args.after)
    delta = compare(rep_b, dz_b, rep_a, dz_a)
    text = dump_json({"scenario_digest": doc_a.get("scenario_digest"), "band": doc_a.get("band"),
                      "before": doc_b.get("after") or doc_b.get("before"),
                      "after": doc_a.get("after") or doc_a.get("before"),
                      "placement": doc_a.get("placement"), "delta": delta.to_dict()})
    if args.out is not None:
        args.out.mkdir(parents=True, exist_ok=True)
        (args.out / "delta.json").write_text(text)
    print(f"dead-zone change {delta.deadzone_area_change_pct:+.2f}%, "
          f"good+excellent change {delta.good_excellent_change_pct:+.2f}%")
    return EXIT_OK


COMMANDS = {
    "generate": cmd_generate,
    "simulate": cmd_simulate,
    "deadzones": cmd_deadzones,
    "place-ris": cmd_place_ris,
    "pipeline": cmd_pipeline,
    "compare": cmd_compare,
}


def _usage(msg):
    print(f"risplan: error: {msg}", file=sys.stderr)
    return EXIT_USAGE


def _setup_logging():
    level = os.environ.get("RISPLAN_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


def main(argv=None):
    _setup_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code) if e.code is not None else EXIT_OK
    set_threads(getattr(args, "jobs", None))
    try:
        return COMMANDS[args.command](args)
    except ValidationError as e:
        print("risplan: scenario validation failed:", file=sys.stderr)
        for v in e.violations:
            print(f"  {v.path}: {v.message}", file=sys.stderr)
        return EXIT_DATA
    except (ScenarioError, CoverageError) as e:
        print(f"risplan: {e}", file=sys.stderr)
        return EXIT_DATA
    except OSError as e:
        print(f"risplan: {e}", file=sys.stderr)
        return EXIT_DATA
    except InvariantError as e:
        print(f"risplan: internal invariant breached: {e}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
