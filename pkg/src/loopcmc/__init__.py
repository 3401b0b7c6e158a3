"""Timelike constant mean curvature surfaces in Minkowski 3-space from
loop-group potentials: integrate, split, apply the Sym formula, verify."""

from .errors import (
    BigCellFailure,
    EmptyResultError,
    ExtractionFailed,
    InvalidArgument,
    LoopCMCError,
    NotInvertibleError,
    TruncationOverflow,
)
from .factorization import BirkhoffResult, big_cell_diagnostic, birkhoff_split, iwasawa_pair_split
from .geometry import (
    BScrollSpec,
    FundamentalData,
    closed_form_surface,
    compare_aligned,
    fundamental_data,
    harmonic_residual,
    null_frenet_frame,
    pde_residual,
    ruledness_check,
)
from .loops import (
    TruncatedLoop,
    check_twisted,
    evaluate,
    graded_project,
    lambda_scaled_derivative,
    loop_invert,
    loop_multiply,
    loop_norm,
)
from .minkowski import ad_action, lorentz_inner, matrix_to_vector, vector_to_matrix
from .pipeline import (
    FrameField,
    Grid,
    build_extended_framing,
    classify_connection,
    extract_normalized_potentials,
    integrate_framing_axis,
    loop_exponential,
    maurer_cartan_form,
)
from .potentials import (
    PotentialPair,
    ScalarFunction,
    bscroll_potentials,
    builtin_potential,
    dalembert_potentials,
    normalized_potentials,
)
from .sym import SurfacePatch, associated_family, bscroll_reconstruction, gauss_map, parallel_k_surface, sym_immersion

__version__ = "0.1.0"
