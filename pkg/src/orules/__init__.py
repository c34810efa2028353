"""Stochastic state-reduction simulator for the Schrodinger-cat scenarios."""

from .dynamics import (CurrentLedger, DynamicsParams, advance_device_pulse,
                       decay_current, physiological_current, step_currents,
                       transfer)
from .engine import EnsembleRunner, Stepper, TrajectoryRecord, simulate
from .errors import *  # noqa: F401,F403
from .harness import (EnsembleStats, compare_hit_cdf, run_ensemble,
                      run_records, run_trajectory)
from .rules import (HitEvent, ScheduledEvent, apply_branching, prune_phantoms,
                    reduce, sample_stochastic_choice)
from .scenario import (EventSchedule, Scenario, build_initial_state, fixture,
                       parse_scenario, serialize_scenario)
from .state import (Brain, BrainStatus, Component, Detector, DevicePulse,
                    Indicator, InternalClock, StateGraph, contains_ready,
                    is_discontinuous, make_component)
from .templates import CompletionMap, Version

__version__ = "0.1.0"
