"""
Planning world: grid, clutter, carriers, sites, RIS units and thresholds.

Coordinates are planar meters. ``Grid.origin`` is the south-west corner of
the raster; row 0 is the northern edge (north-up), column 0 the western edge.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

REFLECT = "reflect"
STAR = "star"
RIS_MODES = (REFLECT, STAR)

DEFAULT_UE_HEIGHT_M = 1.5
DEFAULT_NOISE_FIGURE_DB = 5.0
DEFAULT_SITE_HEIGHT_M = 25.0
DEFAULT_TX_POWER_DBM = 18.0
DEFAULT_ANTENNA_GAIN_DBI = 0.0

# band key -> (band_id, center GHz, bandwidth MHz)
STANDARD_CARRIERS = {
    "3.5": ("n78", 3.5, 100.0),
    "28": ("n257", 28.0, 200.0),
}


class ScenarioError(Exception):
    """Malformed scenario document (bad JSON, wrong types, unknown keys)."""

    def __init__(self, message, path=""):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


class ValidationError(ScenarioError):
    """Scenario parsed but violates one or more invariants."""

    def __init__(self, violations):
        self.violations = list(violations)
        lines = "; ".join(f"{v.path}: {v.message}" for v in self.violations)
        Exception.__init__(self, f"{len(self.violations)} violation(s): {lines}")


@dataclass(frozen=True)
class Violation:
    path: str
    message: str


@dataclass(frozen=True)
class Grid:
    width_px: int
    height_px: int
    resolution_m: float
    origin: tuple = (0.0, 0.0)

    @property
    def shape(self):
        return (self.height_px, self.width_px)

    @property
    def area_m2(self):
        return float(self.width_px) * float(self.height_px) * self.resolution_m ** 2

    @property
    def pixel_area_m2(self):
        return self.resolution_m ** 2

    def pixel_center(self, i, j):
        """World (x, y) of the center of pixel (row i, col j)."""
        ox, oy = self.origin
        x = ox + (np.asarray(j) + 0.5) * self.resolution_m
        y = oy + (self.height_px - np.asarray(i) - 0.5) * self.resolution_m
        if np.ndim(x) == 0:
            return float(x), float(y)
        return x, y

    def to_uv(self, x, y):
        """Continuous raster coordinates (u along columns, v along rows)."""
        ox, oy = self.origin
        u = (x - ox) / self.resolution_m
        v = self.height_px - (y - oy) / self.resolution_m
        return u, v

    def contains(self, x, y):
        ox, oy = self.origin
        return (ox <= x <= ox + self.width_px * self.resolution_m
                and oy <= y <= oy + self.height_px * self.resolution_m)

    def pixel_of(self, x, y):
        """Pixel (row, col) containing world point (x, y); edges clamp inward."""
        u, v = self.to_uv(x, y)
        j = min(max(int(math.floor(u)), 0), self.width_px - 1)
        i = min(max(int(math.floor(v)), 0), self.height_px - 1)
        return i, j

    def center_coordinates(self):
        """Arrays (x, y) of every pixel center, each shaped like the grid."""
        ii, jj = np.indices(self.shape)
        return self.pixel_center(ii, jj)


@dataclass(frozen=True, eq=False)
class ClutterGrid:
    grid: Grid
    building_height_m: np.ndarray

    def __post_init__(self):
        h = np.array(self.building_height_m, dtype=np.float64)
        h.setflags(write=False)
        object.__setattr__(self, "building_height_m", h)

    @property
    def street_mask(self):
        return self.building_height_m == 0

    def __eq__(self, other):
        if not isinstance(other, ClutterGrid):
            return NotImplemented
        return (self.grid == other.grid
                and self.building_height_m.shape == other.building_height_m.shape
                and bool(np.array_equal(self.building_height_m, other.building_height_m)))

    __hash__ = None


@dataclass(frozen=True)
class Carrier:
    band_id: str
    center_freq_ghz: float
    bandwidth_mhz: float

    @property
    def bandwidth_hz(self):
        return self.bandwidth_mhz * 1e6

    @property
    def is_mmwave(self):
        return self.center_freq_ghz >= 6.0


@dataclass(frozen=True)
class Site:
    site_id: str
    position: tuple
    height_m: float = DEFAULT_SITE_HEIGHT_M
    azimuth_deg: float = 0.0
    tx_power_dbm: float = DEFAULT_TX_POWER_DBM
    antenna_gain_dbi: float = DEFAULT_ANTENNA_GAIN_DBI
    carrier: str = "n78"

    @property
    def eirp_dbm(self):
        return self.tx_power_dbm + self.antenna_gain_dbi


@dataclass(frozen=True)
class UeProfile:
    height_m: float = DEFAULT_UE_HEIGHT_M
    noise_figure_db: float = DEFAULT_NOISE_FIGURE_DB


@dataclass(frozen=True)
class RisHardwareProfile:
    """Descriptive metadata of a fabricated surface; never used in link math."""

    n_elements: int
    phase_bits: int
    width_m: float
    control_voltage_v: float
    consumption_w: float
    phase_diff_on_off_deg: float


@dataclass(frozen=True)
class RisUnit:
    ris_id: str
    position: tuple
    height_m: float
    normal_azimuth_deg: float
    mode: str
    beta_r: float
    gain_db: float
    reflection_loss_db: float
    donor_site: str
    hardware: Optional[RisHardwareProfile] = None

    @property
    def normal(self):
        """Unit outward normal (east, north) from the azimuth (clockwise from north)."""
        a = math.radians(self.normal_azimuth_deg)
        return (math.sin(a), math.cos(a))


@dataclass(frozen=True)
class ThresholdConfig:
    rsrp_class_bounds_dbm: tuple = (-80.0, -90.0, -100.0)
    sinr_class_bounds_db: tuple = (20.0, 13.0, 10.0)
    deadzone_rsrp_dbm: float = -100.0
    target_coverage_prob: float = 0.95


@dataclass(frozen=True)
class Scenario:
    clutter: ClutterGrid
    carriers: tuple
    sites: tuple
    ris_units: tuple = ()
    ue: UeProfile = field(default_factory=UeProfile)
    thresholds: ThresholdConfig = field(default_factory=ThresholdConfig)

    def __post_init__(self):
        for name in ("carriers", "sites", "ris_units"):
            object.__setattr__(self, name, tuple(getattr(self, name)))

    @property
    def grid(self):
        return self.clutter.grid

    def site(self, site_id):
        for s in self.sites:
            if s.site_id == site_id:
                return s
        raise KeyError(site_id)

    def carrier(self, key):
        """Look up a carrier by band_id or by center frequency ("3.5", 28, ...)."""
        for c in self.carriers:
            if c.band_id == str(key):
                return c
        try:
            f = float(key)
        except (TypeError, ValueError):
            f = None
        if f is not None:
            for c in self.carriers:
                if math.isclose(c.center_freq_ghz, f, rel_tol=1e-9):
                    return c
        raise KeyError(f"no carrier matching {key!r}")

    def sites_on(self, carrier):
        return sorted((s for s in self.sites if s.carrier == carrier.band_id),
                      key=lambda s: s.site_id)

    def with_ris(self, ris_units):
        return replace(self, ris_units=tuple(self.ris_units) + tuple(ris_units))


# ---------------------------------------------------------------------------
# validation

def _finite(x):
    return isinstance(x, (int, float)) and math.isfinite(x)


def validate(s):
    """Return the list of invariant violations of ``s`` (empty when valid)."""
    out = []
    add = lambda path, msg: out.append(Violation(path, msg))

    g = s.clutter.grid
    if not (isinstance(g.width_px, int) and g.width_px >= 1):
        add("grid.width_px", "must be an integer >= 1")
    if not (isinstance(g.height_px, int) and g.height_px >= 1):
        add("grid.height_px", "must be an integer >= 1")
    if not (_finite(g.resolution_m) and g.resolution_m > 0):
        add("grid.resolution_m", "must be > 0")
    if len(g.origin) != 2 or not all(_finite(v) for v in g.origin):
        add("grid.origin", "must be two finite numbers")
    if out:
        return out

    h = s.clutter.building_height_m
    if h.shape != g.shape:
        add("clutter", f"raster shape {h.shape} does not match grid {g.shape}")
    elif not np.all(np.isfinite(h)) or np.any(h < 0):
        add("clutter", "building heights must be finite and >= 0")

    band_ids = set()
    for k, c in enumerate(s.carriers):
        p = f"carriers[{k}]"
        if c.band_id in band_ids:
            add(f"{p}.band_id", f"duplicate band_id {c.band_id!r}")
        band_ids.add(c.band_id)
        if not (_finite(c.center_freq_ghz) and c.center_freq_ghz > 0):
            add(f"{p}.center_freq_ghz", "must be > 0")
        if not (_finite(c.bandwidth_mhz) and c.bandwidth_mhz > 0):
            add(f"{p}.bandwidth_mhz", "must be > 0")

    site_ids = set()
    for k, st in enumerate(s.sites):
        p = f"sites[{k}]({st.site_id})"
        if st.site_id in site_ids:
            add(f"{p}.site_id", "duplicate site_id")
        site_ids.add(st.site_id)
        if not (_finite(st.height_m) and st.height_m > 0):
            add(f"{p}.height_m", "must be > 0")
        if not _finite(st.tx_power_dbm):
            add(f"{p}.tx_power_dbm", "must be finite")
        if not _finite(st.antenna_gain_dbi):
            add(f"{p}.antenna_gain_dbi", "must be finite")
        if not g.contains(*st.position):
            add(f"{p}.position", f"{tuple(st.position)} lies outside the grid")
        if st.carrier not in band_ids:
            add(f"{p}.carrier", f"unknown band {st.carrier!r}")

    ris_ids = set()
    for k, r in enumerate(s.ris_units):
        p = f"ris_units[{k}]({r.ris_id})"
        if r.ris_id in ris_ids:
            add(f"{p}.ris_id", "duplicate ris_id")
        ris_ids.add(r.ris_id)
        if r.mode not in RIS_MODES:
            add(f"{p}.mode", f"must be one of {RIS_MODES}")
        if not (_finite(r.beta_r) and 0 < r.beta_r <= 1):
            add(f"{p}.beta_r", "must satisfy 0 < beta_r <= 1")
        elif r.mode == REFLECT and r.beta_r != 1:
            add(f"{p}.beta_r", "reflect-only RIS requires beta_r = 1")
        if not (_finite(r.gain_db) and r.gain_db >= 0):
            add(f"{p}.gain_db", "must be >= 0")
        if not (_finite(r.reflection_loss_db) and r.reflection_loss_db >= 0):
            add(f"{p}.reflection_loss_db", "must be >= 0")
        if not (_finite(r.height_m) and r.height_m > 0):
            add(f"{p}.height_m", "must be > 0")
        if not g.contains(*r.position):
            add(f"{p}.position", f"{tuple(r.position)} lies outside the grid")
        if r.donor_site not in site_ids:
            add(f"{p}.donor_site", f"RIS {r.ris_id} references missing site {r.donor_site!r}")
        if r.hardware is not None:
            for name, val in vars(r.hardware).items():
                if not (_finite(val) and val > 0):
                    add(f"{p}.hardware.{name}", "must be > 0")

    if not (_finite(s.ue.height_m) and s.ue.height_m > 0):
        add("ue.height_m", "must be > 0")
    if not (_finite(s.ue.noise_figure_db) and s.ue.noise_figure_db >= 0):
        add("ue.noise_figure_db", "must be >= 0")

    t = s.thresholds
    for name in ("rsrp_class_bounds_dbm", "sinr_class_bounds_db"):
        b = getattr(t, name)
        if len(b) != 3 or not all(_finite(v) for v in b):
            add(f"thresholds.{name}", "needs three finite boundaries")
        elif not all(b[k] > b[k + 1] for k in range(len(b) - 1)):
            add(f"thresholds.{name}", "boundaries must be strictly decreasing")
    if not _finite(t.deadzone_rsrp_dbm):
        add("thresholds.deadzone_rsrp_dbm", "must be finite")
    if not (_finite(t.target_coverage_prob) and 0 < t.target_coverage_prob <= 1):
        add("thresholds.target_coverage_prob", "must satisfy 0 < p <= 1")
    return out


def check(s):
    """Raise :class:`ValidationError` if ``s`` violates any invariant."""
    violations = validate(s)
    if violations:
        raise ValidationError(violations)
    return s


# ---------------------------------------------------------------------------
# document I/O

_TOP_KEYS = {"grid", "clutter", "carriers", "sites", "ris_units", "ue", "thresholds"}
_GRID_KEYS = {"width_px", "height_px", "resolution_m", "origin"}
_CARRIER_KEYS = {"band_id", "center_freq_ghz", "bandwidth_mhz"}
_SITE_KEYS = {"site_id", "position", "height_m", "azimuth_deg", "tx_power_dbm",
              "antenna_gain_dbi", "carrier"}
_RIS_KEYS = {"ris_id", "position", "height_m", "normal_azimuth_deg", "mode", "beta_r",
             "gain_db", "reflection_loss_db", "donor_site", "hardware"}
_HW_KEYS = {"n_elements", "phase_bits", "width_m", "control_voltage_v", "consumption_w",
            "phase_diff_on_off_deg"}
_UE_KEYS = {"height_m", "noise_figure_db"}
_THRESH_KEYS = {"rsrp_class_bounds_dbm", "sinr_class_bounds_db", "deadzone_rsrp_dbm",
                "target_coverage_prob"}


def _obj(d, path, allowed, required=()):
    if not isinstance(d, dict):
        raise ScenarioError("expected an object", path)
    unknown = sorted(set(d) - set(allowed))
    if unknown:
        raise ScenarioError(f"unknown key(s) {unknown}", path)
    missing = [k for k in required if k not in d]
    if missing:
        raise ScenarioError(f"missing key(s) {missing}", path)
    return d


def _num(v, path):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ScenarioError(f"expected a number, got {v!r}", path)
    return float(v)


def _int(v, path):
    if isinstance(v, bool) or not isinstance(v, int):
        raise ScenarioError(f"expected an integer, got {v!r}", path)
    return v


def _str(v, path):
    if not isinstance(v, str):
        raise ScenarioError(f"expected a string, got {v!r}", path)
    return v


def _xy(v, path):
    if not isinstance(v, (list, tuple)) or len(v) != 2:
        raise ScenarioError("expected [x, y]", path)
    return (_num(v[0], f"{path}[0]"), _num(v[1], f"{path}[1]"))


def _list(v, path):
    if not isinstance(v, list):
        raise ScenarioError("expected a list", path)
    return v


def _parse_clutter(d, grid, base_dir):
    _obj(d, "clutter", {"inline", "file"})
    if ("inline" in d) == ("file" in d):
        raise ScenarioError("exactly one of 'inline' or 'file' is required", "clutter")
    if "file" in d:
        p = Path(_str(d["file"], "clutter.file"))
        if not p.is_absolute():
            p = Path(base_dir or ".") / p
        try:
            arr = read_pgm(p.read_text())[0].astype(np.float64)
        except OSError as e:
            raise ScenarioError(f"cannot read raster: {e}", "clutter.file") from e
    else:
        raw = d["inline"]
        try:
            arr = np.array(raw, dtype=np.float64)
        except (TypeError, ValueError) as e:
            raise ScenarioError(f"heights must be numeric: {e}", "clutter.inline") from e
        if arr.ndim == 1 and arr.size == grid.width_px * grid.height_px:
            arr = arr.reshape(grid.shape)
        if arr.ndim != 2:
            raise ScenarioError("expected a row-major array of rows", "clutter.inline")
    return arr


def scenario_from_dict(doc, base_dir=None):
    """Build a :class:`Scenario` from a decoded document (no validation)."""
    _obj(doc, "", _TOP_KEYS, required=("grid", "clutter", "sites"))
    gd = _obj(doc["grid"], "grid", _GRID_KEYS, required=("width_px", "height_px", "resolution_m"))
    grid = Grid(
        width_px=_int(gd["width_px"], "grid.width_px"),
        height_px=_int(gd["height_px"], "grid.height_px"),
        resolution_m=_num(gd["resolution_m"], "grid.resolution_m"),
        origin=_xy(gd.get("origin", [0.0, 0.0]), "grid.origin"),
    )
    if grid.width_px < 1 or grid.height_px < 1:
        raise ScenarioError("grid dimensions must be >= 1", "grid")
    clutter = ClutterGrid(grid, _parse_clutter(doc["clutter"], grid, base_dir))

    carriers = []
    for k, c in enumerate(_list(doc.get("carriers", []), "carriers")):
        p = f"carriers[{k}]"
        _obj(c, p, _CARRIER_KEYS, required=_CARRIER_KEYS)
        carriers.append(Carrier(_str(c["band_id"], f"{p}.band_id"),
                                _num(c["center_freq_ghz"], f"{p}.center_freq_ghz"),
                                _num(c["bandwidth_mhz"], f"{p}.bandwidth_mhz")))

    sites = []
    for k, st in enumerate(_list(doc["sites"], "sites")):
        p = f"sites[{k}]"
        _obj(st, p, _SITE_KEYS, required=("site_id", "position", "carrier"))
        sites.append(Site(
            site_id=_str(st["site_id"], f"{p}.site_id"),
            position=_xy(st["position"], f"{p}.position"),
            height_m=_num(st.get("height_m", DEFAULT_SITE_HEIGHT_M), f"{p}.height_m"),
            azimuth_deg=_num(st.get("azimuth_deg", 0.0), f"{p}.azimuth_deg"),
            tx_power_dbm=_num(st.get("tx_power_dbm", DEFAULT_TX_POWER_DBM), f"{p}.tx_power_dbm"),
            antenna_gain_dbi=_num(st.get("antenna_gain_dbi", DEFAULT_ANTENNA_GAIN_DBI),
                                  f"{p}.antenna_gain_dbi"),
            carrier=_str(st["carrier"], f"{p}.carrier"),
        ))

    ris_units = []
    for k, r in enumerate(_list(doc.get("ris_units", []), "ris_units")):
        p = f"ris_units[{k}]"
        _obj(r, p, _RIS_KEYS, required=_RIS_KEYS - {"hardware"})
        hw = None
        if r.get("hardware") is not None:
            hd = _obj(r["hardware"], f"{p}.hardware", _HW_KEYS, required=_HW_KEYS)
            hw = RisHardwareProfile(
                n_elements=_int(hd["n_elements"], f"{p}.hardware.n_elements"),
                phase_bits=_int(hd["phase_bits"], f"{p}.hardware.phase_bits"),
                **{key: _num(hd[key], f"{p}.hardware.{key}")
                   for key in ("width_m", "control_voltage_v", "consumption_w",
                               "phase_diff_on_off_deg")},
            )
        ris_units.append(RisUnit(
            ris_id=_str(r["ris_id"], f"{p}.ris_id"),
            position=_xy(r["position"], f"{p}.position"),
            height_m=_num(r["height_m"], f"{p}.height_m"),
            normal_azimuth_deg=_num(r["normal_azimuth_deg"], f"{p}.normal_azimuth_deg"),
            mode=_str(r["mode"], f"{p}.mode"),
            beta_r=_num(r["beta_r"], f"{p}.beta_r"),
            gain_db=_num(r["gain_db"], f"{p}.gain_db"),
            reflection_loss_db=_num(r["reflection_loss_db"], f"{p}.reflection_loss_db"),
            donor_site=_str(r["donor_site"], f"{p}.donor_site"),
            hardware=hw,
        ))

    ud = _obj(doc.get("ue", {}), "ue", _UE_KEYS)
    ue = UeProfile(height_m=_num(ud.get("height_m", DEFAULT_UE_HEIGHT_M), "ue.height_m"),
                   noise_figure_db=_num(ud.get("noise_figure_db", DEFAULT_NOISE_FIGURE_DB),
                                        "ue.noise_figure_db"))

    td = _obj(doc.get("thresholds", {}), "thresholds", _THRESH_KEYS)
    dflt = ThresholdConfig()
    thresholds = ThresholdConfig(
        rsrp_class_bounds_dbm=tuple(
            _num(v, "thresholds.rsrp_class_bounds_dbm")
            for v in _list(td.get("rsrp_class_bounds_dbm", list(dflt.rsrp_class_bounds_dbm)),
                           "thresholds.rsrp_class_bounds_dbm")),
        sinr_class_bounds_db=tuple(
            _num(v, "thresholds.sinr_class_bounds_db")
            for v in _list(td.get("sinr_class_bounds_db", list(dflt.sinr_class_bounds_db)),
                           "thresholds.sinr_class_bounds_db")),
        deadzone_rsrp_dbm=_num(td.get("deadzone_rsrp_dbm", dflt.deadzone_rsrp_dbm),
                               "thresholds.deadzone_rsrp_dbm"),
        target_coverage_prob=_num(td.get("target_coverage_prob", dflt.target_coverage_prob),
                                  "thresholds.target_coverage_prob"),
    )
    return Scenario(clutter, tuple(carriers), tuple(sites), tuple(ris_units), ue, thresholds)


def load_scenario(text, base_dir=None):
    """
    Parse and validate a scenario document.

    Parameters
    ----------
    text : str
        JSON scenario document.
    base_dir : path-like, optional
        Directory against which a relative ``clutter.file`` is resolved.

    Raises
    ------
    ScenarioError
        Malformed JSON or schema mismatch.
    ValidationError
        Well-formed document whose contents break an invariant.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ScenarioError(f"invalid JSON: {e}") from e
    return check(scenario_from_dict(doc, base_dir))


def load_scenario_file(path):
    path = Path(path)
    return load_scenario(path.read_text(), base_dir=path.parent)


def _height_value(v):
    v = float(v)
    return int(v) if v.is_integer() else v


def ris_to_dict(r):
    d = {
        "ris_id": r.ris_id,
        "position": [r.position[0], r.position[1]],
        "height_m": r.height_m,
        "normal_azimuth_deg": r.normal_azimuth_deg,
        "mode": r.mode,
        "beta_r": r.beta_r,
        "gain_db": r.gain_db,
        "reflection_loss_db": r.reflection_loss_db,
        "donor_site": r.donor_site,
    }
    if r.hardware is not None:
        d["hardware"] = dict(vars(r.hardware))
    return d


def scenario_to_dict(s, clutter_file=None):
    g = s.grid
    if clutter_file is None:
        clutter = {"inline": [[_height_value(v) for v in row]
                              for row in s.clutter.building_height_m]}
    else:
        clutter = {"file": str(clutter_file)}
    return {
        "grid": {"width_px": g.width_px, "height_px": g.height_px,
                 "resolution_m": g.resolution_m, "origin": [g.origin[0], g.origin[1]]},
        "clutter": clutter,
        "carriers": [{"band_id": c.band_id, "center_freq_ghz": c.center_freq_ghz,
                      "bandwidth_mhz": c.bandwidth_mhz} for c in s.carriers],
        "sites": [{"site_id": st.site_id, "position": [st.position[0], st.position[1]],
                   "height_m": st.height_m, "azimuth_deg": st.azimuth_deg,
                   "tx_power_dbm": st.tx_power_dbm, "antenna_gain_dbi": st.antenna_gain_dbi,
                   "carrier": st.carrier} for st in s.sites],
        "ris_units": [ris_to_dict(r) for r in s.ris_units],
        "ue": {"height_m": s.ue.height_m, "noise_figure_db": s.ue.noise_figure_db},
        "thresholds": {
            "rsrp_class_bounds_dbm": list(s.thresholds.rsrp_class_bounds_dbm),
            "sinr_class_bounds_db": list(s.thresholds.sinr_class_bounds_db),
            "deadzone_rsrp_dbm": s.thresholds.deadzone_rsrp_dbm,
            "target_coverage_prob": s.thresholds.target_coverage_prob,
        },
    }


def save_scenario(s, clutter_file=None):
    """Serialize ``s`` to a JSON document; ``load_scenario`` inverts it exactly."""
    return json.dumps(scenario_to_dict(s, clutter_file), indent=1) + "\n"


# ---------------------------------------------------------------------------
# PGM (P2) rasters

def read_pgm(text):
    """Parse a plain PGM. Returns (array, maxval, comments)."""
    comments = []
    tokens = []
    for line in text.splitlines():
        if "#" in line:
            line, c = line.split("#", 1)
            comments.append(c.strip())
        tokens.extend(line.split())
    if not tokens or tokens[0] != "P2":
        raise ScenarioError("not a plain PGM (P2) raster")
    try:
        w, h, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
        vals = np.array([int(t) for t in tokens[4:]], dtype=np.int64)
    except (IndexError, ValueError) as e:
        raise ScenarioError(f"bad PGM header or data: {e}") from e
    if vals.size != w * h:
        raise ScenarioError(f"PGM has {vals.size} values, expected {w * h}")
    if np.any(vals < 0) or np.any(vals > maxval):
        raise ScenarioError("PGM value outside [0, maxval]")
    return vals.reshape(h, w), maxval, comments


def write_pgm(values, comments=(), maxval=None):
    """Format an integer array as a plain PGM (P2) string."""
    a = np.asarray(values)
    if a.ndim != 2 or np.any(a < 0) or not np.all(a == np.round(a)):
        raise ValueError("PGM needs a 2-D array of nonnegative integers")
    a = a.astype(np.int64)
    if maxval is None:
        maxval = max(int(a.max(initial=0)), 1)
    lines = ["P2"] + [f"# {c}" for c in comments]
    lines.append(f"{a.shape[1]} {a.shape[0]}")
    lines.append(str(maxval))
    lines.extend(" ".join(str(v) for v in row) for row in a)
    return "\n".join(lines) + "\n"


def clutter_pgm(clutter):
    g = clutter.grid
    return write_pgm(clutter.building_height_m, comments=(
        f"building height in meters; grid {g.width_px}x{g.height_px} "
        f"resolution_m={g.resolution_m} origin={list(g.origin)}",))


# ---------------------------------------------------------------------------
# synthetic Manhattan city

@dataclass(frozen=True)
class SyntheticSpec:
    width_px: int = 520
    height_px: int = 520
    resolution_m: float = 5.0
    block_size_m: float = 50.0
    street_width_m: float = 20.0
    building_height_range_m: tuple = (10.0, 40.0)
    n_sites: int = 8
    carrier: Carrier = Carrier(*STANDARD_CARRIERS["3.5"])
    site_height_m: float = DEFAULT_SITE_HEIGHT_M
    tx_power_dbm: float = DEFAULT_TX_POWER_DBM
    antenna_gain_dbi: float = DEFAULT_ANTENNA_GAIN_DBI


def _street_bands(n_px, res, period, street):
    """Per-axis street flags and the center pixel of each street band."""
    centers = (np.arange(n_px) + 0.5) * res
    is_street = np.mod(centers, period) < street
    band_centers = []
    k = 0
    while k * period < n_px * res:
        idx = np.nonzero(is_street & (np.floor(centers / period) == k))[0]
        if idx.size:
            band_centers.append(int(idx[idx.size // 2]))
        k += 1
    return is_street, centers, band_centers


def generate_synthetic(seed, spec=SyntheticSpec()):
    """
    Deterministic Manhattan-grid city.

    Blocks of ``block_size_m`` are separated by streets of ``street_width_m``
    (streets start at the north-west corner). Each block gets one integer
    height drawn uniformly from ``building_height_range_m``. Sites sit on
    street crossings nearest to a uniform lattice over the grid.
    """
    if spec.width_px < 1 or spec.height_px < 1 or spec.resolution_m <= 0:
        raise ValueError("grid dimensions and resolution must be positive")
    if spec.block_size_m <= 0 or spec.street_width_m <= 0:
        raise ValueError("block size and street width must be positive")
    lo, hi = spec.building_height_range_m
    if not (0 < lo <= hi):
        raise ValueError("building height range must satisfy 0 < min <= max")
    if spec.n_sites < 1:
        raise ValueError("n_sites must be >= 1")
    extent_x = spec.width_px * spec.resolution_m
    extent_y = spec.height_px * spec.resolution_m
    if spec.street_width_m > max(extent_x, extent_y):
        raise ValueError("street width exceeds the grid extent")

    period = spec.block_size_m + spec.street_width_m
    col_street, col_c, col_bands = _street_bands(spec.width_px, spec.resolution_m,
                                                 period, spec.street_width_m)
    row_street, row_c, row_bands = _street_bands(spec.height_px, spec.resolution_m,
                                                 period, spec.street_width_m)
    crossings = [(i, j) for i in row_bands for j in col_bands]
    if spec.n_sites > len(crossings):
        raise ValueError(f"n_sites={spec.n_sites} exceeds the {len(crossings)} "
                         "available street crossings")

    rng = np.random.default_rng(seed)
    n_brow = int(math.ceil(extent_y / period))
    n_bcol = int(math.ceil(extent_x / period))
    block_h = rng.integers(int(math.ceil(lo)), int(math.floor(hi)) + 1,
                           size=(n_brow, n_bcol)).astype(np.float64)
    bi = np.floor(row_c / period).astype(int)
    bj = np.floor(col_c / period).astype(int)
    heights = block_h[bi[:, None], bj[None, :]]
    heights[row_street[:, None] | col_street[None, :]] = 0.0

    grid = Grid(spec.width_px, spec.height_px, float(spec.resolution_m), (0.0, 0.0))
    nx = int(math.ceil(math.sqrt(spec.n_sites * extent_x / extent_y)))
    ny = int(math.ceil(spec.n_sites / nx))
    free = list(crossings)
    sites = []
    for k in range(spec.n_sites):
        a, b = divmod(k, nx)
        # target lattice point in pixel units (row, col)
        ti = (a + 0.5) * spec.height_px / ny
        tj = (b + 0.5) * spec.width_px / nx
        best = min(free, key=lambda rc: ((rc[0] + 0.5 - ti) ** 2 + (rc[1] + 0.5 - tj) ** 2, rc))
        free.remove(best)
        sites.append(Site(
            site_id=f"S{k + 1:02d}",
            position=grid.pixel_center(*best),
            height_m=spec.site_height_m,
            azimuth_deg=0.0,
            tx_power_dbm=spec.tx_power_dbm,
            antenna_gain_dbi=spec.antenna_gain_dbi,
            carrier=spec.carrier.band_id,
        ))
    return Scenario(ClutterGrid(grid, heights), (spec.carrier,), tuple(sites))


def standard_carrier(key):
    """Carrier for "3.5" or "28" using the default bandwidths."""
    key = str(key)
    if key in ("3.5", "3.50"):
        key = "3.5"
    elif key in ("28", "28.0"):
        key = "28"
    if key not in STANDARD_CARRIERS:
        raise KeyError(f"unknown standard band {key!r} (use 3.5 or 28)")
    return Carrier(*STANDARD_CARRIERS[key])


def scenario_digest(s):
    return hashlib.sha256(save_scenario(s).encode()).hexdigest()
