"""Crime-hotspot fronts blocked by gaps in the payoff: kinetics, steady states, PDE runs."""

from .kinetics import KineticsParams, classify, find_b, normalize_alpha, potential_F, reaction_f
from .pde_solver import FieldState, GapLayout, SolverConfig, simulate, step
from .steady_state import (
    GapMatch,
    NoBlockingSolution,
    SteadyProfile,
    base_length,
    build_blocking_profile,
    critical_length,
    fold_length,
    gap_match_solve,
    symmetric_profile,
)
from .wave_analysis import classify_outcome, decay_rates, scalar_wave_speed

__version__ = "0.1.0"
