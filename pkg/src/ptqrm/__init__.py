"""Exact and approximate solvers for the PT-symmetric quantum Rabi model."""

from .model import (
    Band,
    EigenPair,
    ModelParams,
    TruncationConfig,
    build_hamiltonian,
    diagonalize_converged,
    exact_diagonalize,
    initial_upper_vacuum,
    sigma_z_diagonal,
    track_bands,
)
from .gfunction import (
    CoefficientTables,
    EPLocation,
    GEvaluation,
    RealZero,
    aa_ep_coupling,
    find_zeros_complex,
    find_zeros_real,
    g_complex,
    g_eval,
    g_real,
    locate_ep,
    series_minus,
    series_plus,
)
from .approx import (
    ApproxState,
    CaaBlock,
    OverlapTable,
    aa_pair,
    caa_block,
    caa_pair,
    coupling_D,
    displaced_number_states,
    laguerre_assoc,
    overlap_D,
    overlap_table,
    state_to_fock,
)
from .dynamics import (
    DynamicsTrace,
    EmissionSpectrum,
    Peak,
    emission_spectrum,
    evolve,
    evolve_in_basis,
    find_peaks,
    qubit_population,
    sigma_z_series,
)
from .metrology import (
    PrepTimeResult,
    QfiResult,
    aa_two_level_state,
    ed_gap,
    ed_state_provider,
    nhtls_ground_state,
    prep_time,
    qfi_nhtls_analytic,
    qfi_numeric,
    qfi_ptqrm_aa_analytic,
    qfi_surface,
)
from . import errors

__version__ = "0.1.0"
