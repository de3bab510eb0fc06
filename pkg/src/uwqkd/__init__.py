"""Underwater photon-transport Monte Carlo and QKD link analysis."""

__version__ = "0.1.0"

from .arrivals_store import ArrivalSet, export_csv, load, persist
from .config import LinkConfig, config_hash, default_config, load_config, parse_config
from .gate_optimizer import (
    DesignRow,
    GateSweepResult,
    default_gate_grid,
    sweep_gate,
    table_row,
    verify_sweep_against_oracle,
)
from .link_analysis import (
    ChannelSelection,
    EmpiricalCdf,
    build_cdf,
    channel_selection,
    gamma,
    select_bit_period,
    select_fov,
)
from .medium_optics import (
    TTHGParams,
    WaterMedium,
    clear_ocean,
    hg_pdf,
    mean_cosine,
    mean_cosine_from_backscatter,
    sample_scattering_angle,
    solve_tthg_from_mean_cosine,
    tthg_pdf,
)
from .qber_model import (
    EnvironmentSpec,
    NoiseBudget,
    ReceiverSpec,
    background_count,
    irradiance_at_depth,
    noise_budget,
    qber,
)
from .transport import (
    ArrivalRecord,
    PhotonState,
    ReceiverGeometry,
    TransmitterSpec,
    TransportLimits,
    launch_photon,
    propagate,
    rotate_direction,
    run_campaign,
    sample_step,
    update_weight,
)
