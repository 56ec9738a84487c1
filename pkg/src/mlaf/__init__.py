"""Maximum-likelihood adaptive filters, classical baselines, bound evaluators and a simulation harness."""

from .confidence import (
    DelayedStream,
    DelayExtrapolateConfidence,
    FixedConfidence,
    GenieConfidence,
    extend_channel,
    extend_for_delay,
    extrapolate_c,
    genie_c,
)
from .core import (
    Channel,
    DataWindow,
    FilterState,
    ObservationModel,
    misalignment,
    normalized_a,
    normalized_misalignment_db,
    push_sample,
    regressor,
    to_db,
)
from .errors import (
    ConfigurationError,
    DimensionError,
    DomainError,
    MlafError,
    NumericalBreakdownError,
    ParameterError,
    UndefinedMetricError,
    WavFormatError,
)
from .filters import (
    APA,
    IML,
    LMS,
    NLMS,
    OBML,
    RLS,
    AdaptiveFilter,
    ApaParams,
    Identity,
    RlsParams,
    apa_update,
    ga_iml_update,
    ga_obml_update,
    iml_update_dense,
    iml_update_via_small_inverse,
    lagrangian_form_update,
    lms_update,
    nlms_update,
    predict,
    rls_update,
)
from .kernels import BACKEND
from .linalg import C_MAX, C_MIN, solve_psd
from .wavio import read_wav

__version__ = "0.1.0"
