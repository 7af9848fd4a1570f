"""Security analysis, optimization and Monte Carlo simulation of decoy-state
BB84 with balanced homodyne detection."""

from .calibration import CalibrationRecord, estimate_mu
from .channel import (
    ChannelParams,
    SourceConfig,
    channel_efficiency,
    detection_prob,
    multiphoton_prob,
    poisson_pmf,
    tagged_ratio,
)
from .homodyne import DetectionPolicy, abandonment_rate, qber, quadrature_sd
from .optimize import (
    ChannelWindow,
    EmptyWindow,
    Optimum,
    channel_window,
    max_rate_vs_threshold,
    optimal_mu,
    optimal_threshold,
)
from .rates import (
    NoFiniteBound,
    RateReport,
    binary_entropy,
    combined_rate,
    decoy_eta1,
    gllp_eta1,
    pns_margin,
    pns_max_length,
    rate_at,
    secure_rate,
)
from .sim import (
    InsufficientStatistics,
    Pulse,
    SessionConfig,
    SimStats,
    decoy_test,
    eve_pns_transform,
    run_session,
    simulate_rate,
)

__version__ = "0.1.0"
