"""Multi-radar respiration sensing: mode decomposition, FMCW processing and fusion.

The public API is re-exported here; see the submodules for details.
"""

from .errors import (
    InsufficientPeaks,
    InvalidInput,
    InvalidScenario,
    MultiRadarError,
    NoMatches,
    NoRespiratoryMode,
    NoTarget,
    ParseError,
)
from .sigproc import (
    ComplexSeries,
    HermitianMatrix,
    RealSeries,
    Spectrum,
    fractional_shift,
    hermitian_eig,
    hilbert,
    taylor_window,
    unwrap_phase,
    xcorr_peak_lag,
)
from .vmd import ModeSet, VmdConfig, update_center_frequency, update_mode_spectrum, vmd_decompose
from .mvmd import MultiChannelSeries, MultiModeSet, mvmd_decompose
from .radar import (
    PowerMap,
    RadarConfig,
    RadarCube,
    RadarImage,
    beamform,
    extract_displacement,
    power_map,
    process_cube,
    range_compress,
    remove_clutter,
)
from .fusion import (
    FusedSignal,
    FusionConfig,
    align_channels,
    fuse,
    integrate_pca,
    pick_reference_channel,
    select_respiratory_mode,
)
from .vitals import (
    MetricReport,
    PeakConfig,
    RespiratoryEstimate,
    compute_metrics,
    detect_peaks,
    intervals_from_peaks,
    match_intervals,
)
from .simulator import (
    BreathingModel,
    RadarPlacement,
    ScenarioConfig,
    Subject,
    generate_breathing,
    ground_truth,
    preset,
    synthesize_cube,
)

__version__ = "0.1.0"
