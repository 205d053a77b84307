"""Dissipatively kicked quantum oscillator toolkit.

Classical strange-attractor ensembles and exact Fock-basis Lindblad
density-matrix evolution, with phase-space, spectral, entropy and negativity
observables, driven by a reproducible CLI (``kfx``).
"""

__version__ = "0.1.0"

from .params import (
    ConfigError,
    FluxoniumParams,
    ParamError,
    RunConfig,
    SystemParams,
    fluxonium_to_dimensionless,
    parse_run_config,
    rescale_to_unit_q,
    serialize_run_config,
    validate_params,
)
from .grids import PhaseGrid, square_grid_spec
from .classical import (
    Ensemble,
    LyapunovResult,
    PhasePoint,
    accumulate_histogram,
    energy_moments,
    evolve_ensemble,
    free_dissipative_step,
    information_dimension,
    initial_ensemble,
    jacobian,
    kick_step,
    lyapunov_spectrum,
    period_map,
)
from .fock import (
    CosMatrix,
    FockVector,
    KickOperator,
    coherent_state,
    cos_element_quadrature,
    cos_matrix,
    kick_unitary,
    lowering_matrix,
    parity_vector,
)
from .lindblad import (
    ChannelCache,
    DensityMatrix,
    LindbladEngine,
    TruncationError,
    damping_channel,
    damping_channel_rk,
    free_phase_rotation,
    kick_conjugation,
    read_snapshot,
    steady_state_detect,
    write_snapshot,
)
from .observables import (
    NegativityResult,
    SpectrumResult,
    entanglement_entropy,
    evolve_negativity,
    grid_correlation,
    husimi_grid,
    mean_energy,
    pair_splittings,
    purity_trace_diagnostics,
    spectrum,
)
