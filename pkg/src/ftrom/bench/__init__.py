"""Scenario registry, snapshot files, experiment driver and reports."""
from .experiments import Failure, RunReport, ScenarioRun, Workspace, run_scenario, train_test_split
from .io import load_snapshots, save_snapshots
from .scenarios import Scenario, default_scenario, load_config, resolve, scenario_from_dict
from .timing import SpeedupResult, measure_speedup
