"""Link-level Monte Carlo: PAM mapping, AWGN transmission, BER estimation.

Symbols are Gray-mapped bipolar PAM.  Trials are drawn in fixed-size
chunks, each chunk from a counter-based stream keyed by (seed, chunk
index), so estimates are reproducible and independent of how chunks are
scheduled across workers.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .objective import Design, SignalStats, pam_amplitude

__all__ = [
    "PamConfig",
    "BerEstimate",
    "pam_modulate",
    "pam_demodulate",
    "simulate_link",
    "condition_number",
    "chunk_rng",
]

CHUNK_TRIALS = 16384


@dataclass(frozen=True)
class PamConfig:
    """Bipolar PAM shape: order and amplitude normalization mode."""

    order: int
    normalizer_mode: str = "exact"

    def __post_init__(self):
        if self.order < 2 or self.order & (self.order - 1):
            raise ValueError("PAM order must be a power of two, at least 2")
        pam_amplitude(self.order, self.normalizer_mode)

    @property
    def bits_per_symbol(self):
        return self.order.bit_length() - 1

    @property
    def amplitude(self):
        return pam_amplitude(self.order, self.normalizer_mode)

    def levels(self):
        k = np.arange(self.order)
        return (2 * k - (self.order - 1)) * self.amplitude

    @classmethod
    def from_stats(cls, stats: SignalStats):
        return cls(order=stats.m_pam, normalizer_mode=stats.pam_normalizer)


@dataclass(frozen=True)
class BerEstimate:
    """Bit error rate with a normal-approximation 95% half-width."""

    ber: float
    trials: int
    bit_errors: int
    ci95_halfwidth: float


def chunk_rng(seed, index):
    """Counter-based generator for one trial chunk, keyed by (seed, index)."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy=seed, spawn_key=(index,))))


def _gray_decode(g):
    k = g.copy()
    shift = 1
    while (g >> shift).any():
        k ^= g >> shift
        shift += 1
    return k


def pam_modulate(bits, cfg: PamConfig):
    """Map groups of log2(order) bits (MSB first, Gray coded) to amplitudes."""
    bits = np.asarray(bits, dtype=np.int64).reshape(-1)
    b = cfg.bits_per_symbol
    if bits.size % b:
        raise ValueError(f"bit count {bits.size} not divisible by {b}")
    groups = bits.reshape(-1, b)
    weights = 1 << np.arange(b - 1, -1, -1)
    gray = groups @ weights
    k = _gray_decode(gray)
    return (2 * k - (cfg.order - 1)) * cfg.amplitude


def pam_demodulate(soft, cfg: PamConfig):
    """Slice to the nearest amplitude (ties to the lower level), Gray-demap."""
    soft = np.asarray(soft, dtype=float).reshape(-1)
    b = cfg.bits_per_symbol
    u = (soft / cfg.amplitude + (cfg.order - 1)) / 2.0
    k = np.clip(np.ceil(u - 0.5), 0, cfg.order - 1).astype(np.int64)
    gray = k ^ (k >> 1)
    shifts = np.arange(b - 1, -1, -1)
    return ((gray[:, None] >> shifts[None, :]) & 1).reshape(-1)


def simulate_link(design: Design, h, cfg: PamConfig, stats: SignalStats, trials, seed) -> BerEstimate:
    """Transmit random symbols through H with AWGN and count bit errors.

    Per trial: draw bits, modulate, emit W x + r (checked nonnegative to
    -1e-12), add noise, remove the DC term, detect, slice, and compare.
    Deterministic in the seed.
    """
    if trials < 1:
        raise ValueError("at least one trial is required")
    h = np.asarray(h, float)
    w, q, r = design.w, design.q, design.r
    n_s = w.shape[1]
    if n_s != stats.n_s:
        raise ValueError("precoder stream count disagrees with the signal statistics")
    b = cfg.bits_per_symbol
    sigma_w = math.sqrt(stats.sigma_w2)
    dc = h @ r
    bit_errors = 0
    done = 0
    index = 0
    while done < trials:
        count = min(CHUNK_TRIALS, trials - done)
        rng = chunk_rng(seed, index)
        bits = rng.integers(0, 2, size=(count, n_s * b))
        x = pam_modulate(bits.reshape(-1), cfg).reshape(count, n_s)
        emitted = x @ w.T + r
        low = emitted.min()
        if low < -1e-12:
            trial_idx, led_idx = np.unravel_index(np.argmin(emitted), emitted.shape)
            raise RuntimeError(
                f"nonnegativity violated at LED {led_idx + 1}: intensity {low:.3e} on trial {done + trial_idx + 1}"
            )
        y = emitted @ h.T
        if sigma_w > 0:
            y = y + rng.normal(0.0, sigma_w, size=y.shape)
        soft = (y - dc) @ q.T
        bits_hat = pam_demodulate(soft.reshape(-1), cfg)
        bit_errors += int((bits_hat != bits.reshape(-1)).sum())
        done += count
        index += 1
    total_bits = trials * n_s * b
    ber = bit_errors / total_bits
    ci = 1.96 * math.sqrt(max(ber * (1.0 - ber), 0.0) / total_bits)
    return BerEstimate(ber=ber, trials=trials, bit_errors=bit_errors, ci95_halfwidth=ci)


def condition_number(h):
    """Ratio of extreme singular values; infinity for a numerically singular H."""
    s = np.linalg.svd(np.asarray(h, float), compute_uv=False)
    if s.size == 0 or s[-1] < 1e-300:
        return math.inf
    return float(s[0] / s[-1])
