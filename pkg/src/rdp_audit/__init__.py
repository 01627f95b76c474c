"""Black-box statistical lower bounds for Renyi differential privacy."""
from .density import (
    BandwidthRule,
    DiscreteDensityTable,
    GridDensity,
    Kernel,
    fit_kde,
    fit_rfe,
    make_joint_grid,
    select_bandwidth,
)
from .divergence import (
    BoundResult,
    EstimatorConfig,
    FloorParams,
    combine_bounds,
    lower_bound,
    normal_quantile,
    renyi_exact,
    renyi_plugin,
    softmax_deriv,
    softmax_floor,
    variance_estimate,
)
from .estimators import GridKernelDensity, RelativeFrequencyEstimator, RenyiDPAuditor
from .exceptions import DegenerateEstimateError, DegenerateSampleError, NumericalFailure
from .mechanisms import (
    AdjacentPair,
    Database,
    SampleSet,
    build_mechanism,
    default_adjacent_pair,
    sample,
)

__version__ = "0.1.0"
