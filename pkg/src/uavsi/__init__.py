"""Discrete-event simulator of a UAV-assisted mission-critical 5G cell with
a closed-loop controller for RAN slicing, VNF placement and DNN splitting."""

from .engine import Engine, Event, MetricSink, SchedulingInPast
from .placement import Placement, PathReport, VnfKind, migrate, path_latency
from .policy import Goal, check, compile_policies, parse_intent, render_intent
from .radio import Bearer, Cell, SliceConfig, allocate_tti, maxmin_fair, serve_tti
from .scenario import ScenarioDoc, ScenarioError, load_scenario
from .simulation import Simulation, run_scenario
from .split import DnnProfile, LayerCost, Objective, best_split, pipeline_fps, split_latency

__version__ = "0.1.0"

__all__ = [
    "Bearer", "Cell", "DnnProfile", "Engine", "Event", "Goal", "LayerCost", "MetricSink", "Objective",
    "PathReport", "Placement", "ScenarioDoc", "ScenarioError", "SchedulingInPast", "Simulation",
    "SliceConfig", "VnfKind", "allocate_tti", "best_split", "check", "compile_policies", "load_scenario",
    "maxmin_fair", "migrate", "parse_intent", "path_latency", "pipeline_fps", "render_intent",
    "run_scenario", "serve_tti", "split_latency",
]
