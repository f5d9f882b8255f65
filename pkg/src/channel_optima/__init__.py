"""Capacity, output-entropy, and optimal-set analysis for finite-dimensional
quantum channels, with tensor-product additivity and hereditary-structure
diagnostics at desk scale."""

__version__ = "0.1.0"

from .config import (
    EPS_SUPPORT,
    derive_rng,
    log_base_label,
    random_ket,
    set_log_base,
    using_log_base,
)
from .qcore import (
    DensityMatrix,
    Projector,
    PureState,
    binary_entropy,
    eig_hermitian,
    log_on_support,
    partial_trace,
    projector_from_span,
    random_density_matrix,
    relative_entropy,
    support_isometry,
    tensor,
    von_neumann_entropy,
)
from .channels import (
    Channel,
    ChannelFormatError,
    ProductChannel,
    catalog,
    channels_extensionally_equal,
    is_bistochastic,
    load_channel,
    random_channel,
    restrict,
    save_channel,
    tensor_channels,
)
from .entropyopt import (
    CapacityReport,
    ConstraintSet,
    Ensemble,
    MinEntropyReport,
    OptimizerConfig,
    check_capacity_inequality,
    check_optimal_average,
    chi,
    closure_via_duality,
    conjugate,
    convex_closure_entropy,
    holevo_capacity,
    min_output_entropy,
)
from .optsets import (
    CoincidenceReport,
    OptimalSetSample,
    coincidence_test,
    hull_membership_defect,
    membership_C,
    membership_E_defect,
    minimal_support_projector,
    optimal_set_support,
    sample_optimal_set_C,
    sample_optimal_set_E,
    support_function_gap,
)
from .product import (
    AdditivityReport,
    HereditaryReport,
    ProjectiveRelationsReport,
    StructureReport,
    additivity_capacity,
    additivity_min_entropy,
    assumption_A_defect,
    assumption_B_defects,
    hereditary_check,
    lemma2_check,
    make_uniformly_entangled,
    projective_relations_check,
    sample_maximally_entangled_states,
    sample_subspace_states,
    structure_theorem_check,
    uniform_entanglement_rank,
    verify_lemma3,
    weyl_decomposition,
)
