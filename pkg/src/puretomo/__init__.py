"""Pure-state tomography from two reduced density matrices.

A library and CLI that reconstructs generic multipartite pure states from
the reduced operators on parties (A, B) and (A, C), brings states on
C^2 x C^d x C^d to a triangular canonical form, and empirically certifies
unique determinability through a feasibility search over compatible
density operators.
"""

from .canonical import (
    MatrixPair,
    TriangularState,
    is_regular_triangular,
    pair_to_state,
    pencil_roots,
    project_out_last_level,
    simultaneous_triangularize,
    state_to_pair,
    triangular_form,
    triangular_manifold_dim,
    triangularize_by_deflation,
)
from .core import (
    DensityOperator,
    PureState,
    SystemShape,
    UnitaryMatrix,
    apply_local_unitary,
    fidelity_pure,
    haar_random_state,
    haar_random_unitary,
    kron,
    partial_trace,
    repair_density,
    schur_unitary,
    sorted_schur,
    trace_distance,
)
from .errors import (
    ConvergenceFailure,
    DegeneratePencil,
    DimensionMismatch,
    DomainError,
    IncompleteBasis,
    InconsistentRdms,
    InvalidOperator,
    ManifestError,
    NonUniqueSuspect,
    NotRegularTriangular,
    NotTriangular,
    PivotFailure,
    RdmMismatch,
    TomographyError,
)
from .experiment import ExperimentConfig, measurement_summary, run_experiment
from .measure import (
    EXACT,
    ExpectationRecord,
    ObservableBasis,
    deduplicated_measurement_count,
    linear_inversion,
    measurement_count,
    observable_basis,
    rdm_from_expectations,
    simulate_expectations,
)
from .reconstruct import (
    RdmPair,
    ReconstructionReport,
    ReconstructOptions,
    bipartition_split,
    rdms_of,
    reconstruct_2dd,
    reconstruct_nqudit,
    reconstruct_pdd,
)
from .uniqueness import (
    CompatibilityDirection,
    NoneFound,
    ReductionDiagnostics,
    SearchOptions,
    Witness,
    alpha_expansion,
    matching_nullspace_basis,
    rdm_match,
    search_alternative,
    verify_theorem_reduce,
)

__version__ = "0.1.0"
