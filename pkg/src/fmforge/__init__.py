"""Robust frequency-modulated Molmer-Sorensen gate design for trapped ions."""
from .dynamics import (
    GateOutcome, PhaseTable, avg_displacement, displacement, gate_outcome, grad_avg_displacement,
    grad_displacement, grad_rotation_angle, phase_table, rotation_angle,
)
from .estimator import FMPulseOptimizer
from .evaluation import (
    Landscape, SweepReport, batch_size_study, dephasing_metric, error_landscape, gate_pairs,
    scalability_sweep, sequence_populations, test_fidelity, trajectory,
)
from .modes import (
    ModeError, ModeStructure, TrapConfig, custom_modes, equilibrium_positions,
    lamb_dicke_matrix, transverse_modes,
)
from .objectives import (
    CalibrationError, CostReport, FidelityConfig, SampleSet, angle_sign, avg_displacement_cost,
    calibrate_omega, cost_batch, cost_sample, fidelity, nonrobust_cost, robust_cost,
)
from .optimizer import (
    AdamHyper, AdamState, ObjectiveSpec, OptimizationError, OptimizationRun, adam_step,
    multi_trial, optimize, sample_offsets,
)
from .pulses import (
    ContinuousPulse, DiscretePulse, PulseError, discretize_continuous, expand_symmetric,
    sample_drive,
)

__version__ = "0.1.0"
