"""Finite-precision MUSIC: emulated low-precision kernels inside a
randomized unitary MUSIC DOA estimator, with a Monte-Carlo cost/accuracy
benchmark harness."""

from .fpemu import (
    FormatOverflowError,
    PrecisionFormat,
    builtin_formats,
    parse_format,
    round_to_format,
    rounded_add,
    rounded_mul,
)
from .kernels import (
    ApConfig,
    ApScheme,
    CostLedger,
    GroupAssignment,
    LedgerMismatchError,
    MpConfig,
    MpScheme,
    UniformScheme,
    ap_error_bound,
    ap_error_bound_apriori,
    assign_groups,
    dot_ap,
    dot_mp,
    dot_uniform,
    matmul_finite,
    parse_scheme,
    predicted_costs,
    scheme_dot,
    scheme_label,
)
from .linalg import (
    RankDeficiencyError,
    economy_qr,
    economy_svd,
    randomized_svd,
    symmetric_eig,
)
from .doa import (
    ArrayConfig,
    Spectrum,
    UnsupportedGeometryError,
    build_unitary_q,
    estimate,
    find_peaks,
    sample_covariance,
    spectrum_classic,
    spectrum_real,
    steering_complex,
    steering_real,
    synthesize_snapshots,
    unitary_transform,
)
from .bench import (
    InfeasibleSamplingError,
    SweepConfig,
    SweepRow,
    TrialResult,
    emit,
    rmse,
    run_sweep,
    run_trial,
    sample_doas,
)

__version__ = "0.1.0"
