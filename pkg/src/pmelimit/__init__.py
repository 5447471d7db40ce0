"""Drift porous medium equation on boxes: implicit Euler through a monotone
finite-volume resolvent, and the large-exponent (Hele-Shaw) limit."""

from .errors import (
    BarrierUnavailable,
    CFLViolated,
    ConfigError,
    CutoffRangeError,
    HorizonTooLong,
    LambdaOutOfRange,
    NonCauchyWarning,
    NonConvergence,
    PMEError,
    RegimePreconditionViolated,
)
from .geometry import (
    CutoffFamily,
    DistanceField,
    Grid,
    OutpointingCertificate,
    VectorFieldSpec,
    build_cutoff,
    build_distance,
    check_outpointing,
    compute_thresholds,
)
from .stationary import (
    RegularizedProfile,
    SolverConfig,
    StationaryProblem,
    StationarySolution,
    resolvent,
    resolvent_hs,
    solve_stationary,
    verify_stationary_estimates,
)
from .semigroup import (
    EulerScheme,
    MildSolution,
    PorousMediumOperator,
    continuity_in_m,
    mild_solve,
    mild_solve_reaction,
    step_scheme,
)
from .reaction import (
    BarrierPair,
    ClampedReactionMap,
    ReactionSpec,
    build_barriers,
    clamp_map,
    verify_confinement,
)
from .limit import (
    BVWindowReport,
    ComplementarityReport,
    MSweep,
    bv_window,
    complementarity_diagnostics,
    congestion_masks,
    run_msweep,
    transport_reference,
)

__version__ = "0.1.0"
