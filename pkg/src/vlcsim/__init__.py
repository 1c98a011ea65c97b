"""Multi-element indoor VLC network simulator and optimization toolkit."""

from .assignment import (
    AssignmentObjective,
    SearchSpaceError,
    exhaustive,
    hrs,
    pra,
    snr_delta,
    wss,
)
from .campaign import (
    CampaignResult,
    GridSweepResult,
    campaign_csv,
    campaign_json,
    grid_sweep_csv,
    run_campaign,
    run_grid_sweep,
    write_campaign,
)
from .channel import (
    ChannelConvergenceError,
    ChannelGains,
    CfrMatrix,
    ImpulseResponse,
    PathCountError,
    build_cfr_matrix,
    cfr,
    cir_from_cfr,
    compute_channel_gains,
    dc_gain,
    los_delay,
    los_gain,
    recursive_oracle,
)
from .combining import (
    BroadcastMessage,
    CodecError,
    combined_sinr,
    decode_assignment,
    encode_assignment,
    gboc_weights,
    mrc_weights,
    oc_weights,
)
from .geometry import (
    SPEED_OF_LIGHT,
    LedSource,
    Photodetector,
    Reflector,
    Room,
    discretize_room,
    unit_vector,
)
from .network import (
    Assignment,
    InfeasibleAssignmentError,
    LinkBudget,
    jain_fairness,
    log_sum_rate,
    rate,
    sinr,
    sum_rate,
    tdma_rates,
    user_rates,
    user_sinr,
)
from .power import (
    FiniteDifferenceReport,
    LagrangeState,
    PowerOptions,
    PowerOptimizationError,
    PowerResult,
    RateDerivativeContext,
    derivative_context,
    finite_difference_check,
    lagrangian_hessian,
    lagrangian_jacobian,
    optimize_power,
    rate_gradient,
    rate_hessian,
)
from .scenario import (
    ConfigError,
    RoomConfig,
    ScenarioConfig,
    build_reference_scenario,
    load_scenario,
    save_scenario,
)
from .stats import bootstrap_mean_ci, cdf, percentile

__version__ = "0.1.0"
