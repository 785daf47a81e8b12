"""Scenario handling, simulation, Monte Carlo audits and the command line."""

from .emit import emit, read_json, write_csv, write_json, write_manifest
from .oracle import (containment_fraction, ellipsoid_sampler, intersection_sampler,
                     reachable_sampler)
from .runner import Audit, RunResult, StepRecord, run, run_detailed
from .scenario import (Scenario, Schedule, generate_scenario, load_scenario, save_scenario,
                       scenario_from_dict, scenario_to_dict, template_models)
from .simulate import simulate_truth

__all__ = [
    "Audit", "RunResult", "Scenario", "Schedule", "StepRecord",
    "containment_fraction", "ellipsoid_sampler", "emit", "generate_scenario",
    "intersection_sampler", "load_scenario", "reachable_sampler", "read_json", "run",
    "run_detailed", "save_scenario", "scenario_from_dict", "scenario_to_dict",
    "simulate_truth", "template_models", "write_csv", "write_json", "write_manifest",
]
