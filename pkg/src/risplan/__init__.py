"""Raster planning engine for RIS-assisted 5G radio networks."""
from .scenario import (Carrier, ClutterGrid, Grid, RisHardwareProfile, RisUnit, Scenario,
                       ScenarioError, Site, SyntheticSpec, ThresholdConfig, UeProfile,
                       ValidationError, generate_synthetic, load_scenario, save_scenario,
                       validate)
from .propagation import fspl, los_check, pl_urban, site_pathloss
from .ris_channel import (check_feasibility, incidence_angle, pl_ris_cascade, pl_ris_corridor,
                          ris_rx_power)
from .coverage import (compare, compute_maps, compute_rx_power, coverage_stats,
                       detect_dead_zones, noise_floor_dbm)
from .planner import (PlacementConstraints, default_constraints, estimate_min_ris,
                      generate_candidates, greedy_place, run_pipeline, score_candidate)

__version__ = "0.1.0"
