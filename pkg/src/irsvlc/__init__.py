"""Reflector-aided MIMO visible-light link simulation and joint transceiver design."""

from .association import (
    Assignment,
    RelaxedV,
    distance_greedy,
    random_assignment,
    recover_assignment,
    to_v,
    validate_assignment,
)
from .baselines import mmse_precoding_baseline, no_irs_design, zf_precoding_baseline
from .channel import ChannelSet, assemble_h, build_channels, concentrator_gain, los_gain, nlos_gain
from .montecarlo import BerEstimate, PamConfig, condition_number, pam_demodulate, pam_modulate, simulate_link
from .objective import (
    Design,
    PowerBudget,
    SignalStats,
    led_headroom_usage,
    mse,
    normalized_mse,
    pam_amplitude,
    snr_hat,
    total_power,
)
from .scene import LinkGeometry, OpticalParams, Point3, Scene, SceneConfig, build_scene, los_geometry, nlos_geometry
from .solver import (
    DualPrecomp,
    DualState,
    SolverOptions,
    SolverReport,
    alternating_optimize,
    dual_gradients,
    lagrangian_minimizer,
    low_snr_detector,
    mmse_detector,
    mse_grad_wrt_v,
    solve_precoder,
    solve_relaxed_assignment,
    zero_forcing_design,
)

__version__ = "0.1.0"
