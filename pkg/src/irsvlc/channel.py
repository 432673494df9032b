"""Lambertian channel gains and MIMO channel assembly.

Single-link gains follow the generalized Lambertian radiant model with an
idealized optical concentrator at the detector.  Reflected (two-leg) links
attenuate with the square of the distance sum, as if emitted by an image
source behind the reflector.  The MIMO matrix is the direct-path matrix
plus a reflected part that depends linearly on the unit-to-pair allocation
matrix V.
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass

import numpy as np

from .scene import OpticalParams, Point3, Scene, los_geometry, nlos_geometry

__all__ = [
    "ChannelSet",
    "concentrator_gain",
    "los_gain",
    "nlos_gain",
    "build_channels",
    "assemble_h",
    "pair_index",
    "save_channel_set",
    "load_channel_set",
]


def pair_index(pd_idx, led_idx, n_pds):
    """Column index of the (PD, LED) pair, 0-based: pd + led * n_pds.

    This matches the column-major vectorization of an n_pds x n_leds
    matrix, so vec(H2)[p] addresses the same pair as column p of the
    reflected-gain bank.
    """
    return pd_idx + led_idx * n_pds


@dataclass
class ChannelSet:
    """Direct-path matrix plus the per-unit reflected gain bank.

    h1 has shape (n_pds, n_leds).  h_nlos has shape (n_units, n_pds * n_leds)
    and its column pair_index(pd, led, n_pds) holds the gains of every unit
    for that (PD, LED) pair.
    """

    h1: np.ndarray
    h_nlos: np.ndarray

    def __post_init__(self):
        self.h1 = np.asarray(self.h1, dtype=float)
        self.h_nlos = np.asarray(self.h_nlos, dtype=float)
        if self.h1.ndim != 2 or self.h_nlos.ndim != 2:
            raise ValueError("channel matrices must be two-dimensional")
        if self.h_nlos.shape[1] != self.h1.shape[0] * self.h1.shape[1]:
            raise ValueError(
                f"gain bank has {self.h_nlos.shape[1]} columns, expected "
                f"{self.h1.shape[0] * self.h1.shape[1]}"
            )
        if (self.h1 < 0).any() or (self.h_nlos < 0).any():
            raise ValueError("channel gains must be nonnegative")

    @property
    def n_pds(self):
        return self.h1.shape[0]

    @property
    def n_leds(self):
        return self.h1.shape[1]

    @property
    def n_units(self):
        return self.h_nlos.shape[0]

    @property
    def n_pairs(self):
        return self.h_nlos.shape[1]


def concentrator_gain(phi, q, phi0):
    """Idealized concentrator gain: q^2 / sin^2(phi0) inside the field of
    view, zero beyond it."""
    if q <= 0:
        raise ValueError("refractive index must be positive")
    if not 0 < phi0 <= math.pi / 2:
        raise ValueError("field-of-view semi-angle must lie in (0, pi/2]")
    if not 0 <= phi <= math.pi:
        raise ValueError("incidence angle must lie in [0, pi]")
    if phi > phi0:
        return 0.0
    return q * q / math.sin(phi0) ** 2


def los_gain(tx: Point3, rx: Point3, optics: OpticalParams):
    """Direct-path Lambertian gain.

    A m+1 g / (2 pi D^2) * cos^m(theta_tx) * cos(theta_rx) * f(theta_rx),
    with f the concentrator gain.  Emission is restricted to the source's
    forward hemisphere, so the result is never negative.
    """
    geo = los_geometry(tx, rx)
    cos_tx = max(math.cos(geo.tx_angle), 0.0)
    cos_rx = math.cos(geo.rx_angle)
    f = concentrator_gain(geo.rx_angle, optics.refractive_index, optics.fov_semi_angle)
    if f == 0.0:
        return 0.0
    m = optics.lambertian_index
    scale = optics.pd_area * (m + 1) * optics.filter_gain / (2 * math.pi * geo.distance**2)
    return scale * cos_tx**m * cos_rx * f


def nlos_gain(tx: Point3, unit: Point3, rx: Point3, optics: OpticalParams):
    """Reflected-path gain through one unit.

    Same Lambertian form as the direct path but attenuated by the unit
    reflectivity and by the square of the summed leg lengths.
    """
    leg1, leg2 = nlos_geometry(tx, unit, rx)
    cos_tx = max(math.cos(leg1.tx_angle), 0.0)
    cos_rx = math.cos(leg2.rx_angle)
    f = concentrator_gain(leg2.rx_angle, optics.refractive_index, optics.fov_semi_angle)
    if f == 0.0:
        return 0.0
    m = optics.lambertian_index
    total = leg1.distance + leg2.distance
    scale = optics.irs_reflectivity * optics.pd_area * (m + 1) * optics.filter_gain / (2 * math.pi * total**2)
    return scale * cos_tx**m * cos_rx * f


def build_channels(scene: Scene) -> ChannelSet:
    """Evaluate every direct and reflected gain of a scene."""
    n_t, n_r, n = scene.n_leds, scene.n_pds, scene.n_units
    h1 = np.zeros((n_r, n_t))
    for t, led in enumerate(scene.leds):
        for r, pd in enumerate(scene.pds):
            h1[r, t] = los_gain(led, pd, scene.optics)
    bank = np.zeros((n, n_r * n_t))
    for t, led in enumerate(scene.leds):
        for r, pd in enumerate(scene.pds):
            p = pair_index(r, t, n_r)
            for u, unit in enumerate(scene.irs_units):
                bank[u, p] = nlos_gain(led, unit, pd, scene.optics)
    return ChannelSet(h1=h1, h_nlos=bank)


def assemble_h(chans: ChannelSet, v) -> np.ndarray:
    """Full MIMO matrix for an allocation matrix V (relaxed or binary).

    vec(H2)[p] = dot(h_nlos[:, p], V[:, p]); H = H1 + H2.  V must have
    entries in [0, 1] and row sums at most 1.
    """
    v = np.asarray(v, dtype=float)
    if v.shape != (chans.n_units, chans.n_pairs):
        raise ValueError(f"allocation shape {v.shape} does not match ({chans.n_units}, {chans.n_pairs})")
    if v.size:
        if v.min() < -1e-12 or v.max() > 1 + 1e-12:
            raise ValueError("allocation entries must lie in [0, 1]")
        if v.sum(axis=1).max() > 1 + 1e-9:
            raise ValueError("allocation row sums must not exceed 1")
    h2_vec = (chans.h_nlos * v).sum(axis=0)
    h2 = h2_vec.reshape(chans.n_leds, chans.n_pds).T
    return chans.h1 + h2


def save_channel_set(chans: ChannelSet, directory):
    """Dump both matrices as CSV (one file each, 17 significant digits)."""
    os.makedirs(directory, exist_ok=True)
    for name, mat in (("los_gains", chans.h1), ("nlos_gains", chans.h_nlos)):
        path = os.path.join(directory, f"{name}.csv")
        np.savetxt(path, mat, delimiter=",", fmt="%.17g", header=f"shape: {mat.shape[0]} {mat.shape[1]}")


def load_channel_set(directory) -> ChannelSet:
    mats = {}
    for name in ("los_gains", "nlos_gains"):
        path = os.path.join(directory, f"{name}.csv")
        with open(path) as fh:
            header = fh.readline()
        rows, cols = (int(t) for t in header.split(":")[1].split())
        data = np.loadtxt(path, delimiter=",", ndmin=2)
        mats[name] = data.reshape(rows, cols)
    return ChannelSet(h1=mats["los_gains"], h_nlos=mats["nlos_gains"])
