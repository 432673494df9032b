"""Reference transceiver designs for comparison runs.

All baselines emit designs that satisfy both emission-power constraints
exactly; detectors are the closed-form MSE-optimal ones unless the scheme
itself defines the detector.
"""
from __future__ import annotations

import numpy as np

from .channel import ChannelSet
from .objective import Design, PowerBudget, SignalStats
from .solver import SolverOptions, SolverReport, alternating_optimize, mmse_detector, zero_forcing_design

__all__ = [
    "zf_precoding_baseline",
    "mmse_precoding_baseline",
    "no_irs_design",
]


def zf_precoding_baseline(h, stats: SignalStats, budget: PowerBudget) -> Design:
    """Pseudo-inverse precoder scaled to the power budget, MSE-optimal detector."""
    w, _ = zero_forcing_design(h, stats, budget)
    q = mmse_detector(h, w, stats)
    return Design(w=w, q=q, r=budget.bias.copy())


def mmse_precoding_baseline(h, stats: SignalStats, budget: PowerBudget) -> Design:
    """Regularized-inverse precoder with a noise-dependent loading term.

    W is proportional to the first n_s columns of H^T (H H^T + rho I)^{-1}
    with rho = sigma_w^2 n_pds / (sigma_x^2 (P_total - r^T r)), scaled like
    the zero-forcing design to satisfy both power constraints.
    """
    h = np.asarray(h, float)
    n_r = h.shape[0]
    p_sig = budget.signal_power
    if p_sig <= 0:
        raise ValueError("no signal power left for the regularized precoder")
    rho = stats.sigma_w2 * n_r / (stats.sigma_x2 * p_sig)
    direction = h.T @ np.linalg.inv(h @ h.T + rho * np.eye(n_r))
    w0 = direction[:, : stats.n_s]
    kappa = stats.sigma_x * stats.pam_amp * (stats.m_pam - 1)
    zeta_pow = np.sqrt(p_sig / (stats.sigma_x2 * (direction * direction).sum()))
    row_l1 = np.abs(w0).sum(axis=1).max()
    zeta_row = budget.headroom.min() / (kappa * row_l1) if row_l1 > 0 else np.inf
    w = min(zeta_pow, zeta_row) * w0
    q = mmse_detector(h, w, stats)
    return Design(w=w, q=q, r=budget.bias.copy())


def no_irs_design(chans: ChannelSet, stats: SignalStats, budget: PowerBudget, opts=None) -> SolverReport:
    """Alternate precoder and detector on the direct-path channel only."""
    bare = ChannelSet(h1=chans.h1, h_nlos=np.zeros((0, chans.n_pairs)))
    return alternating_optimize(None, bare, stats, budget, opts or SolverOptions())
