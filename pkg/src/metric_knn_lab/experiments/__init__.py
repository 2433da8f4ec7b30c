"""Simulators and bound sweeps."""

from .bounds import (
    RegionSpec,
    ball_average,
    concentration_bound,
    deviation_concentration,
    dgkl_bound_sweep,
    lb_differentiation_check,
    whole_space,
)
from .consistency import strong_consistency_path, weak_consistency_run
from .parallel import run_trials, trial_rng
from .prop12 import Prop12Report, prop12_counterexample
from .schedules import (
    CounterexampleSchedule,
    Schedule,
    log_schedule,
    schedule_by_name,
    sqrt_schedule,
)

__all__ = [
    "CounterexampleSchedule",
    "Prop12Report",
    "RegionSpec",
    "Schedule",
    "ball_average",
    "concentration_bound",
    "deviation_concentration",
    "dgkl_bound_sweep",
    "lb_differentiation_check",
    "log_schedule",
    "prop12_counterexample",
    "run_trials",
    "schedule_by_name",
    "sqrt_schedule",
    "strong_consistency_path",
    "trial_rng",
    "weak_consistency_run",
    "whole_space",
]
