"""Demodulation MSE, SNR, and emission-power constraint functions.

With white symbol statistics Rx = sigma_x^2 I and white receiver noise
Rw = sigma_w^2 I, the objective is

    MSE = tr(QHW Rx (QHW)^T) + tr(Q Rw Q^T) + tr(Rx) - 2 tr(QHW Rx).

Emission feasibility requires sigma_x^2 ||W||_F^2 + r^T r <= P_total and,
per LED, sigma_x * a * (M - 1) * ||w_row||_1 <= headroom, where a is the
amplitude-grid spacing.  The per-LED bound is exactly the worst case of
the nonnegativity requirement W x + r >= 0 over all symbol vectors, so
the headroom equals the LED's DC bias.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Design",
    "SignalStats",
    "PowerBudget",
    "pam_amplitude",
    "mse",
    "mse_matrices",
    "normalized_mse",
    "snr_hat",
    "total_power",
    "led_headroom_usage",
    "power_residuals",
]


def pam_amplitude(order, mode="exact"):
    """Spacing of the bipolar amplitude grid {+-a, +-3a, ..., +-(order-1)a}.

    "exact" gives a = sqrt(3 / (order^2 - 1)), which makes a uniform symbol
    have unit mean square; "paper" selects the alternative constant
    sqrt(3 / (order^2 + 1)).
    """
    if mode == "exact":
        return math.sqrt(3.0 / (order**2 - 1))
    if mode == "paper":
        return math.sqrt(3.0 / (order**2 + 1))
    raise ValueError(f"unknown normalizer mode: {mode!r}")


@dataclass
class SignalStats:
    """Symbol/noise second-order statistics and modulation shape."""

    sigma_x2: float = 1.0
    sigma_w2: float = 1e-14
    n_s: int = 4
    m_pam: int = 4
    pam_normalizer: str = "exact"

    def __post_init__(self):
        if self.sigma_x2 <= 0 or self.sigma_w2 < 0:
            raise ValueError("variances must be positive (noise may be zero only in limits)")
        if self.n_s < 1:
            raise ValueError("stream count must be at least 1")
        m = self.m_pam
        if m < 2 or m & (m - 1):
            raise ValueError("modulation order must be a power of two, at least 2")
        pam_amplitude(m, self.pam_normalizer)

    @property
    def sigma_x(self):
        return math.sqrt(self.sigma_x2)

    @property
    def pam_amp(self):
        return pam_amplitude(self.m_pam, self.pam_normalizer)


@dataclass
class Design:
    """Precoder W (n_leds x n_s), detector Q (n_s x n_pds), DC bias r."""

    w: np.ndarray
    q: np.ndarray
    r: np.ndarray

    def __post_init__(self):
        self.w = np.asarray(self.w, dtype=float)
        self.q = np.asarray(self.q, dtype=float)
        self.r = np.asarray(self.r, dtype=float).reshape(-1)
        for name, arr in (("w", self.w), ("q", self.q), ("r", self.r)):
            if not np.isfinite(arr).all():
                raise ValueError(f"{name} contains non-finite entries")
        if (self.r < 0).any():
            raise ValueError("DC bias must be nonnegative")
        if self.w.shape[0] != self.r.shape[0]:
            raise ValueError("bias length must match the precoder's LED rows")


@dataclass
class PowerBudget:
    """Total emission power cap and per-LED amplitude headroom.

    The headroom vector is the per-LED excursion budget; setting it equal
    to the DC bias makes the row-l1 constraint equivalent to nonnegativity
    of the emitted intensity.  Solvers here read the bias as the headroom.
    """

    p_total: float
    headroom: np.ndarray

    def __post_init__(self):
        self.headroom = np.asarray(self.headroom, dtype=float).reshape(-1)
        if self.p_total <= 0:
            raise ValueError("total power must be positive")
        if (self.headroom < 0).any():
            raise ValueError("headroom must be nonnegative")

    @classmethod
    def uniform_bias(cls, p_total, r0, n_leds):
        return cls(p_total=p_total, headroom=np.full(n_leds, float(r0)))

    @property
    def bias(self):
        return self.headroom

    @property
    def signal_power(self):
        """Power left for the zero-mean signal part."""
        return self.p_total - float(self.headroom @ self.headroom)


def mse_matrices(h, w, q, stats: SignalStats):
    """MSE evaluated on raw matrices (H, W, Q)."""
    g = q @ h @ w
    return float(
        stats.sigma_x2 * (g * g).sum()
        + stats.sigma_w2 * (q * q).sum()
        + stats.n_s * stats.sigma_x2
        - 2.0 * stats.sigma_x2 * np.trace(g)
    )


def mse(h, design: Design, stats: SignalStats):
    """Mean squared symbol error of a linear transceiver over channel H."""
    return mse_matrices(h, design.w, design.q, stats)


def normalized_mse(h, design: Design, stats: SignalStats):
    """MSE divided by the total symbol power n_s * sigma_x^2."""
    return mse(h, design, stats) / (stats.n_s * stats.sigma_x2)


def snr_hat(h, w, stats: SignalStats):
    """Receive SNR: sigma_x^2 ||HW||_F^2 / (sigma_w^2 n_pds)."""
    hw = h @ w
    return float(stats.sigma_x2 * (hw * hw).sum() / (stats.sigma_w2 * h.shape[0]))


def total_power(design: Design, stats: SignalStats):
    """Expected emission power sigma_x^2 ||W||_F^2 + r^T r."""
    return float(stats.sigma_x2 * (design.w * design.w).sum() + design.r @ design.r)


def led_headroom_usage(design: Design, stats: SignalStats):
    """Worst-case signal excursion per LED: sigma_x * a * (M-1) * ||w_row||_1."""
    amp = stats.sigma_x * stats.pam_amp * (stats.m_pam - 1)
    return amp * np.abs(design.w).sum(axis=1)


def power_residuals(design: Design, stats: SignalStats, budget: PowerBudget):
    """Constraint violations: (total-power excess, per-LED headroom excess)."""
    excess_total = total_power(design, stats) - budget.p_total
    excess_rows = led_headroom_usage(design, stats) - budget.headroom
    return excess_total, excess_rows
