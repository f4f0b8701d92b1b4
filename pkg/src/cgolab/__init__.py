"""Numerical laboratory for recovering a time-dependent zero-order coefficient
of a parabolic equation from boundary measurements.

The pieces, bottom up: space-time grids and fields, theta-scheme IBVP solvers,
exponentially weighted probe solutions, weighted energy/Poincare inequality
checks, discretized boundary measurement maps, the Fourier-slice inversion
pipeline with its stability sweeps, and the semilinear application that
recovers a nonlinearity from the linearized boundary map.
"""

from .errors import ConfigError, SolverError
from .grid import DirectionMask, Grid, build_grid, direction_mask, neighborhood_mask
from .fields import BoundaryField, Potential, ScalarField
from .forward import (
    SemilinearResult,
    ThetaScheme,
    neumann_trace,
    solve_backward,
    solve_forward,
    solve_semilinear,
)
from .norms import (
    ModulusParams,
    boundary_sobolev_weights,
    fit_modulus_constant,
    hminus1_distance,
    hminus1_norm,
    holder_interpolation_check,
    modulus_eval,
    sobolev_norm,
)
from .cgo import (
    CgoParams,
    CgoSolution,
    build_cgo,
    corrector_source,
    envelope_fit,
    exp_weight,
    principal_part,
    remainder_decay_report,
)
from .carleman import (
    CarlemanReport,
    carleman_parts,
    carleman_ratio,
    carleman_report,
    conjugated_apply,
    energy_cross_term,
    poincare_ratio,
    sample_family,
)
from .dtn import (
    DtnBasis,
    DtnMatrix,
    DtnOracle,
    add_noise,
    assemble_difference_matrix,
    assemble_dtn_matrix,
    dtn_apply,
    load_field,
    operator_norm,
    pairing,
    pairing_volume,
    partial_dtn_apply,
    save_field,
)
from .reconstruct import (
    FrequencyGrid,
    FrequencyNode,
    ReconstructionConfig,
    ReconstructionResult,
    build_frequency_grid,
    choose_direction,
    exact_slice_values,
    fourier_slice,
    invert_cutoff,
    partial_masks,
    probe_rho_cap,
    reconstruct,
    select_parameters,
    slice_error_report,
    stability_sweep,
)
from .semilinear import (
    Nonlinearity,
    SemilinearOracle,
    dtn_semilinear,
    fd_frechet_report,
    frechet_dtn,
    linearized_potential,
    recover_nonlinearity,
    semilinear_solution,
    semilinear_stability_sweep,
)

__version__ = "0.1.0"

__all__ = [
    "BoundaryField",
    "CarlemanReport",
    "CgoParams",
    "CgoSolution",
    "ConfigError",
    "DirectionMask",
    "DtnBasis",
    "DtnMatrix",
    "DtnOracle",
    "FrequencyGrid",
    "FrequencyNode",
    "Grid",
    "ModulusParams",
    "Nonlinearity",
    "Potential",
    "ReconstructionConfig",
    "ReconstructionResult",
    "ScalarField",
    "SemilinearOracle",
    "SemilinearResult",
    "SolverError",
    "ThetaScheme",
    "add_noise",
    "assemble_difference_matrix",
    "assemble_dtn_matrix",
    "boundary_sobolev_weights",
    "build_cgo",
    "build_frequency_grid",
    "build_grid",
    "carleman_parts",
    "carleman_ratio",
    "carleman_report",
    "choose_direction",
    "conjugated_apply",
    "corrector_source",
    "direction_mask",
    "dtn_apply",
    "dtn_semilinear",
    "energy_cross_term",
    "envelope_fit",
    "exact_slice_values",
    "exp_weight",
    "fd_frechet_report",
    "fit_modulus_constant",
    "fourier_slice",
    "frechet_dtn",
    "hminus1_distance",
    "hminus1_norm",
    "holder_interpolation_check",
    "invert_cutoff",
    "linearized_potential",
    "load_field",
    "modulus_eval",
    "neighborhood_mask",
    "neumann_trace",
    "operator_norm",
    "pairing",
    "pairing_volume",
    "partial_dtn_apply",
    "partial_masks",
    "poincare_ratio",
    "principal_part",
    "probe_rho_cap",
    "reconstruct",
    "recover_nonlinearity",
    "remainder_decay_report",
    "sample_family",
    "save_field",
    "select_parameters",
    "semilinear_solution",
    "semilinear_stability_sweep",
    "slice_error_report",
    "sobolev_norm",
    "solve_backward",
    "solve_forward",
    "solve_semilinear",
    "stability_sweep",
]
