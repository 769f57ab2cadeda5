"""Disturbance accommodation with limited model information.

Synthesis of deadbeat, sink-aware, PI and optimal centralized controllers for
networks of scalar subsystems, exact closed-loop costs, and competitive-ratio
evaluation on worst-case plant families.
"""

__version__ = "0.1.0"

from .evaluation import (RatioReport, Tolerances, Trajectory, cost_deadbeat_closed_form,
                         cost_optimal_closed_form, cost_simulated, family_path, family_sink,
                         family_thm1, optimal_cost_lower_bound, ratio, ratio_bound, simulate,
                         sweep)
from .graphs import (DirectedGraph, ValidationReport, from_sparsity, is_supergraph, sink_ordering,
                     sinks, validate_structure)
from .model import (Controller, CostReport, Plant, PlantFileError, controller_sparsity,
                    load_controller, load_plant, save_controller, save_plant, validate_plant)
from .riccati import (DareConvergenceError, DareSingularError, DareSolution, NilpotencyError,
                      build_augmented, nilpotent_closed_form, solve_dare, solve_for_plant)
from .synthesis import (StrategyKind, SynthesisError, pi_gains, reference_to_disturbance,
                        sink_gain, synth_deadbeat, synth_optimal_centralized, synth_pi,
                        synth_theta, synthesize)

__all__ = [
    "Controller", "CostReport", "DareConvergenceError", "DareSingularError", "DareSolution",
    "DirectedGraph", "NilpotencyError", "Plant", "PlantFileError", "RatioReport", "StrategyKind",
    "SynthesisError", "Tolerances", "Trajectory", "ValidationReport", "build_augmented",
    "controller_sparsity", "cost_deadbeat_closed_form", "cost_optimal_closed_form",
    "cost_simulated", "family_path", "family_sink", "family_thm1", "from_sparsity",
    "is_supergraph", "load_controller", "load_plant", "nilpotent_closed_form",
    "optimal_cost_lower_bound", "pi_gains", "ratio", "ratio_bound", "reference_to_disturbance",
    "save_controller", "save_plant", "simulate", "sink_gain", "sink_ordering", "sinks",
    "solve_dare", "solve_for_plant", "sweep", "synth_deadbeat", "synth_optimal_centralized",
    "synth_pi", "synth_theta", "synthesize", "validate_plant", "validate_structure",
]
