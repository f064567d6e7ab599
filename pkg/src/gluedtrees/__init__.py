"""Quantum fast hitting on central-random glued trees.

Submodules
----------
graphs      glued-tree construction, validation, chain reduction
linalg      tridiagonal eigensolver and Krylov exponential action
walks       quantum / classical walks and hitting curves
analysis    first-peak search, scaling sweeps, fits
photonics   coupling calibration, layout design, frames, alpha
cli         command-line front end
"""

from .analysis import (
    FitResult,
    PeakConfig,
    PeakResult,
    ScalingRecord,
    chain_peak,
    enhancement_ratio,
    find_first_peak,
    fit_linear,
    fit_power_law,
    scaling_sweep,
)
from .graphs import (
    ChainHamiltonian,
    GluedTreeGraph,
    GluedTreeSpec,
    build_glued_tree,
    column_project,
    node_count,
    reduce_to_chain,
    validate_gluing,
)
from .walks import (
    WalkKind,
    crw_distribution_full,
    crw_hitting_lumped,
    qw_distribution_full,
    qw_hitting_chain,
    sweep_curve,
)

__version__ = "0.1.0"
