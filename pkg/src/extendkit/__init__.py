"""Growth certificates, majorant sequences and truncated invertible extensions of operators."""
from .exceptions import (
    CertificationError,
    ExtendKitError,
    NumericalError,
    PowerOverflowError,
    PreconditionError,
    RangeError,
    SchemaError,
)
from .extension import (
    ExtElement,
    TruncatedExtension,
    apply_S,
    embed,
    ext_norm,
    gram_limit,
    renorm_hilbert,
    sqp_norm_check,
    verify_extension,
)
from .growth import GrowthAnalyzer, GrowthCertificate, beurling_sum, check_E, check_P, fit_P
from .majorants import (
    BeurlingScaffold,
    MajorantSequence,
    build_beurling,
    build_exp,
    build_geometric,
    build_poly,
    check_submultiplicative,
)
from .operators import (
    DenseOperator,
    GrowthProfile,
    WeightedShift,
    gelfand_limits,
    min_modulus,
    power_norm,
    profile_of,
    v_sequence,
)
from .star import (
    StarCertificate,
    check_arens_criterion,
    check_decomposition_bound,
    check_star,
    decomposition_oracle,
    search_criterion_violation,
    search_ladder,
)

__version__ = "0.1.0"
