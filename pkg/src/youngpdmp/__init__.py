"""Simulation and verification of a particle process on generalized Young tableaux."""

from .params import Parameters, ParameterError, q_rate, validate
from .partitions import (Cell, StandardTableau, YoungDiagram, addable_corners, dim,
                         enumerate_tableaux, hook_walk_corner, removable_corners)
from .tableau_state import HeightState, InvalidStateError
from .pdmp import Event, ExplosionError, SimConfig, flow, hitting_time, run, run_ensemble

__version__ = "0.1.0"
