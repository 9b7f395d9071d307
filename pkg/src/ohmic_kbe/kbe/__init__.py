"""Kadanoff-Baym time stepping on the two-time grid."""

from .filon import FilonTables, FilonWeightSet, TranslationInvariant
from .grid import ANTISYMMETRIC, SYMMETRIC, Symmetry, TwoTimeGrid
from .solver import (
    ForceTerms,
    Observers,
    SolverState,
    Trajectory,
    cauchy_schwarz_violation,
    default_memory_depth,
    evolve,
    filon_weights,
    initialize,
    regularized_force,
    step,
)
from .stepper import ETD, VERLET, Integrator, StepperCoeffs, stepper_coeffs
from .checkpoint import load_checkpoint, read_header, save_checkpoint
