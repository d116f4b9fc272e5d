"""Compatibility analysis for finite-outcome quantum observables.

Represents POVMs on finite-dimensional spaces and decides, certifies, and
constructs their compatibility relations: joint measurability, coexistence,
joint measurability of binarizations, post-processing and relabeling order,
extremality via minimal dilations, and steering of bipartite states.
"""

from .compatibility import (
    BinaryJointCertificate,
    CompatibilityVerdict,
    ExtremeMotherJoint,
    MotherAssignment,
    PairWitness,
    Rank1PackingVerdict,
    ViolatedCondition,
    binarization_jm_all,
    coexistence_check,
    cone_membership,
    effect_pair_joint,
    extreme_joint_with_mother,
    extreme_pair_joint,
    jm_check,
    jm_problem,
    jm_threshold,
    joint_from_mother_binary,
    mother_from_joint,
    post_processing_finder,
    rank1_packing_condition,
    relabeling_finder,
    search_mother,
)
from .dilation import (
    DilationDiagnostics,
    ExtremalityReport,
    NaimarkDilation,
    dilate_minimal,
    is_extreme,
    perturbed_pair,
    verify_dilation,
)
from .errors import (
    CapExceededError,
    HermiticityError,
    InconsistentConstraintsError,
    InputError,
    InvalidObservableError,
    NotApplicableError,
    OrderError,
    PositivityError,
    PovmCompatError,
    ShapeError,
)
from .feasibility import (
    FEASIBLE,
    NUMERICALLY_INFEASIBLE,
    UNDECIDED,
    AffineConstraint,
    BlockSpec,
    FeasibilityProblem,
    FeasibilityVerdict,
    dykstra_solve,
    project_affine,
    project_psd,
)
from .linalg import (
    DEFAULT_TOL,
    Tolerance,
    check_effect,
    douglas_factor,
    loewner_leq,
    max_eigenvalue,
    min_eigenvalue,
    partial_trace_first,
    pinv,
    sqrt_psd,
    tensor,
)
from .observables import (
    DiscreteObservable,
    JointCertificate,
    ObservableDiagnostics,
    StochasticMatrix,
    binarize,
    commutes,
    convex_mixture,
    diagnose_effects,
    is_pvm,
    mix_with_trivial,
    post_process,
    product_joint,
    relabel,
    subset_effect,
    trivial_observable,
    validate,
)
from .steering import (
    Assemblage,
    BipartiteState,
    LhsModel,
    SteeringVerdict,
    assemblage_from,
    lhs_check,
    lhs_from_joint,
    steerable,
)

__version__ = "0.1.0"
