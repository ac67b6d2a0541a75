import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from risplan.scenario import (REFLECT, STAR, Grid, RisHardwareProfile, ScenarioError,
                              SyntheticSpec, ValidationError, clutter_pgm,
                              generate_synthetic, load_scenario, load_scenario_file,
                              read_pgm, save_scenario, scenario_digest, standard_carrier,
                              validate, write_pgm)

from helpers import make_ris, make_scene, open_scene


def minimal_doc():
    return {
        "grid": {"width_px": 10, "height_px": 10, "resolution_m": 10.0},
        "clutter": {"inline": [[0] * 10 for _ in range(10)]},
        "carriers": [{"band_id": "n78", "center_freq_ghz": 3.5, "bandwidth_mhz": 100}],
        "sites": [{"site_id": "S01", "position": [45.0, 45.0], "carrier": "n78"}],
    }


class TestGrid:
    def test_area_and_pixel_centers(self):
        g = Grid(4, 3, 5.0, (100.0, 200.0))
        assert g.area_m2 == 4 * 3 * 25.0
        # row 0 is the northern edge
        assert g.pixel_center(0, 0) == (102.5, 212.5)
        assert g.pixel_center(2, 3) == (117.5, 202.5)

    def test_pixel_of_inverts_pixel_center(self):
        g = Grid(7, 5, 2.0, (-3.0, 4.0))
        for i in range(5):
            for j in range(7):
                assert g.pixel_of(*g.pixel_center(i, j)) == (i, j)

    def test_large_area_no_overflow(self):
        g = Grid(200_000, 200_000, 100.0, (0.0, 0.0))
        assert g.area_m2 == 4e14


class TestLoad:
    def test_minimal_document(self):
        s = load_scenario(json.dumps(minimal_doc()))
        assert len(s.sites) == 1
        assert s.ris_units == ()
        assert s.grid.area_m2 == 10_000.0

    def test_missing_donor_named(self):
        doc = minimal_doc()
        doc["ris_units"] = [{"ris_id": "R1", "position": [5.0, 5.0], "height_m": 5.0,
                             "normal_azimuth_deg": 0.0, "mode": "reflect", "beta_r": 1.0,
                             "gain_db": 15.0, "reflection_loss_db": 0.5,
                             "donor_site": "S99"}]
        with pytest.raises(ValidationError) as e:
            load_scenario(json.dumps(doc))
        msg = str(e.value)
        assert "R1" in msg and "S99" in msg

    def test_reference_document_counts(self):
        # 480 x 560 px at 5 m covers 6.72 km2
        doc = minimal_doc()
        doc["grid"] = {"width_px": 480, "height_px": 560, "resolution_m": 5.0}
        doc["clutter"] = {"inline": [[0] * 480 for _ in range(560)]}
        doc["sites"] = [{"site_id": f"S{k:02d}", "position": [100.0 + 250 * (k % 4),
                                                               400.0 + 1000 * (k // 4)],
                         "carrier": "n78"} for k in range(8)]
        s = load_scenario(json.dumps(doc))
        assert len(s.sites_on(s.carrier("3.5"))) == 8
        assert s.grid.area_m2 == pytest.approx(6.72e6)

    def test_unknown_key_rejected(self):
        doc = minimal_doc()
        doc["sites"][0]["colour"] = "red"
        with pytest.raises(ScenarioError, match="colour"):
            load_scenario(json.dumps(doc))

    def test_bad_json(self):
        with pytest.raises(ScenarioError):
            load_scenario("{not json")

    def test_clutter_file_reference(self, tmp_path):
        s = generate_synthetic(3, SyntheticSpec(width_px=30, height_px=20, n_sites=2))
        (tmp_path / "c.pgm").write_text(clutter_pgm(s.clutter))
        (tmp_path / "s.json").write_text(save_scenario(s, clutter_file="c.pgm"))
        assert load_scenario_file(tmp_path / "s.json") == s


class TestRoundTrip:
    def test_empty_ris(self):
        s = open_scene(12, sites=[("S01", (3, 3))])
        assert load_scenario(save_scenario(s)) == s

    def test_mixed_modes_keep_beta(self):
        s = open_scene(12, sites=[("S01", (3, 3))])
        hw = RisHardwareProfile(1600, 1, 0.4, 5.0, 2.5, 160.0)
        ris = [make_ris(s, "R1", (5, 5), 0.0, "S01", REFLECT, 1.0),
               make_ris(s, "R2", (6, 5), 90.0, "S01", STAR, 0.1 + 0.2),
               make_ris(s, "R3", (7, 5), 270.0, "S01", STAR, 1 / 3)]
        ris[0] = ris[0].__class__(**{**vars(ris[0]), "hardware": hw})
        s = s.with_ris(ris)
        back = load_scenario(save_scenario(s))
        assert back == s
        assert [r.beta_r for r in back.ris_units] == [1.0, 0.1 + 0.2, 1 / 3]

    def test_generated_bit_identical(self):
        s = generate_synthetic(42)
        text = save_scenario(s)
        back = load_scenario(text)
        assert back == s
        assert save_scenario(back) == text
        assert scenario_digest(back) == scenario_digest(s)

    @settings(max_examples=15, deadline=None)
    @given(seed=st.integers(0, 2**31), w=st.integers(5, 40), h=st.integers(5, 40),
           n=st.integers(1, 3))
    def test_round_trip_property(self, seed, w, h, n):
        # 5 px at 5 m always holds at least one street crossing per axis
        s = generate_synthetic(seed, SyntheticSpec(width_px=w, height_px=h, n_sites=1,
                                                   block_size_m=15.0 * n,
                                                   street_width_m=10.0))
        assert load_scenario(save_scenario(s)) == s


class TestValidate:
    def test_valid(self):
        assert validate(open_scene(10, sites=[("S01", (2, 2))])) == []

    def test_beta_zero(self):
        s = open_scene(10, sites=[("S01", (2, 2))])
        s = s.with_ris([make_ris(s, "R1", (5, 5), 0.0, "S01", STAR, 0.0)])
        v = validate(s)
        assert len(v) == 1
        assert "R1" in v[0].path and "beta_r" in v[0].path

    def test_site_out_of_bounds(self):
        from risplan.scenario import Site
        s = make_scene(np.zeros((10, 10)), sites=[Site("S01", (-5.0, 0.0))])
        v = validate(s)
        assert len(v) == 1
        assert "position" in v[0].path

    def test_negative_height(self):
        h = np.zeros((4, 4))
        h[1, 1] = -1.0
        s = make_scene(h, sites=[("S01", (0, 0))])
        assert [x.path for x in validate(s)] == ["clutter"]

    def test_duplicate_site(self):
        s = open_scene(10, sites=[("S01", (2, 2)), ("S01", (5, 5))])
        assert any("duplicate" in x.message for x in validate(s))

    def test_reflect_requires_unit_beta(self):
        s = open_scene(10, sites=[("S01", (2, 2))])
        s = s.with_ris([make_ris(s, "R1", (5, 5), 0.0, "S01", REFLECT, 0.5)])
        assert len(validate(s)) == 1


class TestSynthetic:
    def test_determinism(self):
        assert generate_synthetic(1) == generate_synthetic(1)
        assert save_scenario(generate_synthetic(1)) == save_scenario(generate_synthetic(1))

    def test_seeds_differ(self):
        assert generate_synthetic(1) != generate_synthetic(2)

    def test_street_as_wide_as_grid(self):
        spec = SyntheticSpec(width_px=40, height_px=40, resolution_m=5.0, street_width_m=200.0,
                             n_sites=1)
        s = generate_synthetic(0, spec)
        assert np.count_nonzero(s.clutter.building_height_m) == 0

    def test_building_fraction_matches_block_layout(self):
        spec = SyntheticSpec(width_px=400, height_px=400, resolution_m=5.0, block_size_m=50.0,
                             street_width_m=20.0, building_height_range_m=(10.0, 40.0))
        s = generate_synthetic(7, spec)
        frac = np.count_nonzero(s.clutter.building_height_m) / s.clutter.building_height_m.size
        # analytic count: per axis, 10 of every 14 pixels are inside a block
        per_axis = sum(1 for k in range(400) if ((k + 0.5) * 5.0) % 70.0 >= 20.0) / 400
        assert frac == pytest.approx(per_axis ** 2, abs=1e-12)
        assert abs(frac - (50 / 70) ** 2) <= 0.02

    def test_heights_in_range(self):
        s = generate_synthetic(5)
        h = s.clutter.building_height_m
        assert h[h > 0].min() >= 10.0 and h.max() <= 40.0

    def test_reference_counts(self):
        s = generate_synthetic(42)
        assert s.grid.area_m2 == pytest.approx(6.76e6)
        assert len(s.sites) == 8
        assert s.carriers == (standard_carrier("3.5"),)

    @settings(max_examples=20, deadline=None)
    @given(seed=st.integers(0, 2**31), n=st.integers(1, 12), w=st.integers(20, 120),
           h=st.integers(20, 120))
    def test_sites_on_streets_and_valid(self, seed, n, w, h):
        spec = SyntheticSpec(width_px=w, height_px=h, n_sites=n)
        try:
            s = generate_synthetic(seed, spec)
        except ValueError:
            return
        assert validate(s) == []
        for site in s.sites:
            i, j = s.grid.pixel_of(*site.position)
            assert s.clutter.building_height_m[i, j] == 0.0

    def test_rejects_bad_spec(self):
        with pytest.raises(ValueError):
            generate_synthetic(0, SyntheticSpec(n_sites=0))
        with pytest.raises(ValueError):
            generate_synthetic(0, SyntheticSpec(width_px=10, height_px=10, n_sites=500))


class TestPgm:
    def test_round_trip(self):
        a = np.array([[0, 3, 255], [7, 0, 1]])
        back, maxval, comments = read_pgm(write_pgm(a, comments=("hello",)))
        assert np.array_equal(back, a)
        assert maxval == 255
        assert comments == ["hello"]
