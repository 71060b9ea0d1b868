"""kamtorus: spectral computation and a-posteriori certification of
quasi-periodic invariant tori in partially integrable Hamiltonian systems."""

__version__ = "0.1.0"

from .certificate import (
    CertificateReport,
    ConstantLedger,
    GlobalNormConstants,
    build_ledger,
    certify,
    estimate_global_constants,
    kam_check,
    matrix_inverse_control,
    soundness_report,
)
from .cohomology import (
    DiophantineParams,
    DivisorCollisionError,
    estimate_gamma,
    russmann_constant,
    solve_cohomological,
)
from .fourier import FourierMap, StripNorm, cauchy_bound, matmul
from .frames import (
    FrameBundle,
    TorusCandidate,
    build_frames,
    extended_torsion,
    invariance_error,
    isotropy_errors,
    normal_frame,
    reducibility_error,
    symplecticity_error,
    tangent_frame,
    torsion,
)
from .hamiltonian import (
    ConservedQuantity,
    HamiltonianSystem,
    builtin_system,
    poisson_bracket,
    verify_commutation,
    verify_involution,
    verify_involution_of,
)
from .isoenergetic import (
    FrequencyRay,
    TotalError,
    iterate_kam_iso,
    newton_step_iso,
    solve_triangular_iso,
    total_error,
)
from .solver import (
    NewtonSchedule,
    SolveResult,
    contraction_slope,
    iterate_kam,
    newton_step,
    solve_triangular,
)

__all__ = [
    "CertificateReport",
    "ConservedQuantity",
    "ConstantLedger",
    "DiophantineParams",
    "DivisorCollisionError",
    "FourierMap",
    "FrameBundle",
    "FrequencyRay",
    "GlobalNormConstants",
    "HamiltonianSystem",
    "NewtonSchedule",
    "SolveResult",
    "StripNorm",
    "TorusCandidate",
    "TotalError",
    "__version__",
    "build_frames",
    "build_ledger",
    "builtin_system",
    "cauchy_bound",
    "certify",
    "contraction_slope",
    "estimate_gamma",
    "estimate_global_constants",
    "extended_torsion",
    "invariance_error",
    "isotropy_errors",
    "iterate_kam",
    "iterate_kam_iso",
    "kam_check",
    "matmul",
    "matrix_inverse_control",
    "newton_step",
    "newton_step_iso",
    "normal_frame",
    "poisson_bracket",
    "reducibility_error",
    "russmann_constant",
    "solve_cohomological",
    "solve_triangular",
    "solve_triangular_iso",
    "soundness_report",
    "symplecticity_error",
    "tangent_frame",
    "torsion",
    "total_error",
    "verify_commutation",
    "verify_involution",
    "verify_involution_of",
]
