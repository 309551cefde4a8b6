"""Log-Gaussian infinite-depth-and-width predictions for ReLU ResNets,
with Monte Carlo simulators and statistical verification tools."""

from .config import INV_SQRT2, NetConfig, Scheme
from .density import DensityGrid, GridSpec, histogram, infinite_width_logout_density, log_chi2_density, predicted_logout_density
from .errors import (
    DegenerateSampleError,
    GridTooNarrowError,
    InsufficientDataError,
    NumericalError,
    ResnetLimitsError,
    ValidationError,
)
from .estimate import (
    CorrEstimate,
    LayerStats,
    MomentSummary,
    conjecture_stats,
    estimate_C,
    ks_test,
    ks_test_2samp,
    output_sq_correlation,
    summarize,
)
from .simulate import ChainSample, ForwardTrace, RngStream, forward_chain, forward_full, jacobian_column, sample_G
from .theory import (
    CSource,
    HypoConstant,
    OutputStats,
    TheoryPrediction,
    beta_and_c,
    corr_sq_from_var,
    hypoactivation_total,
    interlayer_total,
    j2_bar,
    lag_angle,
    predict_G,
    predict_output_stats,
    sphere_oracles,
)

__version__ = "0.1.0"
