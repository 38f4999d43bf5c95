"""Hybrid polyhedral spaces with curl/div seminorms and discrete Poincare-type constants."""

from .hybridspace import (
    BC_FLAVORS,
    MAX_DEGREE,
    FaceSpacePolicy,
    HybridLayout,
    HybridVector,
    KernelContainmentError,
    LocalForms,
    assemble_local_forms,
    build_layout,
    cell_field,
    flux_functionals,
    flux_vectors,
    jump_control_constant,
    local_interpolate,
    policy_containment_defect,
    random_vector,
    reduce,
    seminorms,
    zeros,
)
from .koszul import (
    CellSplit,
    FaceSplit,
    OperatorInverse,
    cell_split,
    curl_inverse,
    dim_face_rotation_complement,
    dim_face_rotations,
    dim_gradient_complement,
    dim_gradients,
    dim_rotation_complement,
    dim_rotations,
    div_inverse,
    face_split,
)
from .mesh import (
    DOMAIN_KINDS,
    MeshError,
    PolyMesh,
    checkerboard_eta,
    gen_structured,
    load_mesh,
    mesh_content_hash,
    regularity_report,
    save_mesh,
    with_eta,
)
from .polybasis import (
    ScalarBasis,
    TangentBasis,
    VectorBasis,
    cell_scalar_basis,
    cell_vector_basis,
    face_scalar_basis,
    face_tangent_basis,
    graded_exponents,
    poly_dim,
    project,
)
from .quadrature import QuadRule, cell_rule, face_rule
from .reconstruct import (
    ReconstructionOperator,
    adjoint_consistency,
    boundedness_constants,
    build_cell_lifts,
    build_curl_lift,
    build_div_lift,
    curl_commutation_defect,
    defining_residual,
    div_commutation_defect,
)
from .spectral import (
    DegenerateFormError,
    GlobalForms,
    QuadraticFormPair,
    assemble_forms,
    assemble_global_forms,
    degeneracy_probe,
    norm_equivalence,
    pencil_max,
    refinement_study,
    study_mesh,
    variant_constants,
    weber_constant,
    write_study_csv,
    write_study_json,
)

__version__ = "0.1.0"

__all__ = [
    "BC_FLAVORS",
    "DOMAIN_KINDS",
    "MAX_DEGREE",
    "CellSplit",
    "DegenerateFormError",
    "FaceSpacePolicy",
    "FaceSplit",
    "GlobalForms",
    "HybridLayout",
    "HybridVector",
    "KernelContainmentError",
    "LocalForms",
    "MeshError",
    "OperatorInverse",
    "PolyMesh",
    "QuadRule",
    "QuadraticFormPair",
    "ReconstructionOperator",
    "ScalarBasis",
    "TangentBasis",
    "VectorBasis",
    "adjoint_consistency",
    "assemble_forms",
    "assemble_global_forms",
    "assemble_local_forms",
    "boundedness_constants",
    "build_cell_lifts",
    "build_curl_lift",
    "build_div_lift",
    "build_layout",
    "cell_field",
    "cell_rule",
    "cell_scalar_basis",
    "cell_split",
    "cell_vector_basis",
    "checkerboard_eta",
    "curl_commutation_defect",
    "curl_inverse",
    "defining_residual",
    "degeneracy_probe",
    "dim_face_rotation_complement",
    "dim_face_rotations",
    "dim_gradient_complement",
    "dim_gradients",
    "dim_rotation_complement",
    "dim_rotations",
    "div_commutation_defect",
    "div_inverse",
    "face_rule",
    "face_scalar_basis",
    "face_split",
    "face_tangent_basis",
    "flux_functionals",
    "flux_vectors",
    "gen_structured",
    "graded_exponents",
    "jump_control_constant",
    "load_mesh",
    "local_interpolate",
    "mesh_content_hash",
    "norm_equivalence",
    "pencil_max",
    "policy_containment_defect",
    "poly_dim",
    "project",
    "random_vector",
    "reduce",
    "refinement_study",
    "regularity_report",
    "save_mesh",
    "seminorms",
    "study_mesh",
    "variant_constants",
    "weber_constant",
    "with_eta",
    "write_study_csv",
    "write_study_json",
    "zeros",
    "__version__",
]
