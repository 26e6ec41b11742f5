"""Three-level atomic ensembles in a two-mode cavity.

Full and adiabatically eliminated Hamiltonians on an explicit tensor-product
basis, unitary propagation, collective-excitation analysis and validity
checks for the large-detuning regime.
"""

from .collective import (
    BlockComparison,
    CollectiveBlock,
    CollectiveState,
    block_hamiltonian,
    build_collective_states,
    verify_block_against_full,
)
from .dynamics import (
    FrequencyEstimate,
    PropagationConfig,
    Trajectory,
    extract_frequency,
    propagate,
    standard_observables,
)
from .ensemble import (
    EffectiveCoupling,
    EnsembleSpec,
    ValidityReport,
    check_validity,
    effective_couplings,
    sample_ensemble,
)
from .hilbert import (
    SparseOperator,
    StateVector,
    TensorBasis,
    annihilation,
    apply,
    atomic_sigma,
    basis_state,
    creation,
    ground_state,
    make_basis,
)
from .model import (
    AtomParams,
    CavityParams,
    DetuningSet,
    build_classical_drive,
    build_effective_ladder,
    build_effective_lambda,
    build_full_ladder,
    build_single_photon,
    detunings,
    doppler_two_photon_sum,
)

__version__ = "0.1.0"
