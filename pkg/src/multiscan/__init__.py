"""Multiscale scan statistics with size-dependent critical values.

Detects intervals (1D), order-statistic windows (density model) and
axis-parallel rectangles (2D grids) of elevated mean or intensity.  Scans are
evaluated on a sparse, near-linear collection of candidate windows; critical
values come from five calibrations (traditional, Dümbgen-Spokoiny,
Sharpnack-Arias-Castro, blocked, Bonferroni) backed by Monte Carlo
simulation where needed.  A power lab measures each calibration against the
detection boundary.
"""

from .calibrate import (
    CalibrationKey,
    CalibrationKind,
    CalibrationTable,
    CriticalValueVector,
    NullMaxSample,
    blocked_calibration,
    bonferroni_calibration,
    build_calibration,
    empirical_level,
    get_or_build,
    mc_penalized_quantile,
    null_max_sample,
    penalty,
)
from .densmodel import (
    DensityAlternative,
    OrderWindow,
    PointSample,
    density_stat,
    simulate_alternative,
    simulate_uniform,
)
from .errors import (
    CalibrationError,
    ChecksumError,
    ConfigurationError,
    DegenerateWindowError,
    ExperimentError,
    InputFormatError,
    MultiscanError,
    StorageError,
)
from .powerlab import (
    CompareRow,
    PowerPoint,
    RealizedExponent,
    boundary_mu,
    compare_table,
    estimate_power,
    realized_exponent,
)
from .scanner import (
    GridData,
    ScanReport,
    fast_scan,
    fast_scan_2d,
    fast_scan_density,
    naive_scan,
    naive_scan_2d,
)
from .seqmodel import (
    PrefixSums,
    Sequence,
    SignalSpec,
    Window,
    inject_signal,
    prefix_sums,
    simulate_null,
    window_stat,
)
from .sparsegrid import (
    Rect,
    RectCollection,
    SparseCollection,
    approximating_member,
    build_collection_1d,
    build_collection_2d,
    grid_spacing,
    grid_spacing_2d,
)

__version__ = "0.1.0"
