"""Scene construction for an indoor optical MIMO downlink.

LEDs sit at the centers of an equal-area partition of the ceiling, the
photodiode array is a horizontal uniform planar array, and the reflector
panel is a uniform lattice spanning a rectangle on one wall.  All
transceiver normal vectors are perpendicular to the ground, so every
irradiance/incidence angle is measured against the vertical axis.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Point3",
    "OpticalParams",
    "LinkGeometry",
    "Scene",
    "SceneConfig",
    "build_scene",
    "los_geometry",
    "nlos_geometry",
]


@dataclass(frozen=True)
class Point3:
    """A point in room coordinates, meters."""

    x: float
    y: float
    z: float

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.x, self.y, self.z)):
            raise ValueError(f"non-finite coordinate: ({self.x}, {self.y}, {self.z})")

    def as_array(self):
        return np.array([self.x, self.y, self.z], dtype=float)


@dataclass(frozen=True)
class OpticalParams:
    """Photodetector and reflector optics.

    pd_area is in m^2, fov_semi_angle in radians; the remaining quantities
    are dimensionless.  Reflectivity applies per reflector unit.
    """

    pd_area: float
    lambertian_index: float
    filter_gain: float
    refractive_index: float
    fov_semi_angle: float
    irs_reflectivity: float

    def __post_init__(self):
        if self.pd_area <= 0:
            raise ValueError("pd_area must be positive")
        if self.lambertian_index < 0:
            raise ValueError("lambertian_index must be nonnegative")
        if self.filter_gain < 0:
            raise ValueError("filter_gain must be nonnegative")
        if self.refractive_index <= 0:
            raise ValueError("refractive_index must be positive")
        if not 0 < self.fov_semi_angle <= math.pi / 2:
            raise ValueError("fov_semi_angle must lie in (0, pi/2]")
        if not 0 <= self.irs_reflectivity <= 1:
            raise ValueError("irs_reflectivity must lie in [0, 1]")


@dataclass(frozen=True)
class LinkGeometry:
    """Distance and emission/reception angles of one straight light path."""

    distance: float
    tx_angle: float
    rx_angle: float


@dataclass
class SceneConfig:
    """Placement recipe for one room.

    Lengths are meters.  Grids are (count along x or the wall's horizontal
    axis, count along y or the wall's vertical axis).  The reflector
    rectangle is given by two opposite corners that must lie on a single
    wall (x = 0, x = width, y = 0, or y = depth).
    """

    room: tuple[float, float, float]
    led_grid: tuple[int, int]
    n_leds: int
    pd_center: tuple[float, float, float]
    pd_grid: tuple[int, int]
    pd_spacing: float
    n_pds: int
    irs_rect: tuple[tuple[float, float, float], tuple[float, float, float]]
    irs_grid: tuple[int, int]
    n_irs: int
    optics: OpticalParams


@dataclass
class Scene:
    """Validated placement of every LED, PD, and reflector unit."""

    leds: list[Point3]
    pds: list[Point3]
    irs_units: list[Point3]
    optics: OpticalParams
    room_dims: tuple[float, float, float]

    def __post_init__(self):
        w, d, h = self.room_dims
        if min(w, d, h) <= 0:
            raise ValueError("room dimensions must be positive")
        for name, pts in (("led", self.leds), ("pd", self.pds), ("irs", self.irs_units)):
            for i, p in enumerate(pts):
                if not (-1e-9 <= p.x <= w + 1e-9 and -1e-9 <= p.y <= d + 1e-9 and -1e-9 <= p.z <= h + 1e-9):
                    raise ValueError(f"{name} {i} at ({p.x}, {p.y}, {p.z}) lies outside the room")
        if self.leds and self.pds:
            if min(p.z for p in self.leds) < max(p.z for p in self.pds):
                raise ValueError("downlink geometry requires LEDs above PDs")
        self._reject_coincident()

    def _reject_coincident(self):
        # coincident points would give zero-length links later; fail early
        def clash(a, b):
            return a.x == b.x and a.y == b.y and a.z == b.z

        for led in self.leds:
            for pd in self.pds:
                if clash(led, pd):
                    raise ValueError(f"LED and PD coincide at ({led.x}, {led.y}, {led.z})")
        for unit in self.irs_units:
            for other in self.leds + self.pds:
                if clash(unit, other):
                    raise ValueError(f"reflector unit coincides with a transceiver at ({unit.x}, {unit.y}, {unit.z})")

    @property
    def n_leds(self):
        return len(self.leds)

    @property
    def n_pds(self):
        return len(self.pds)

    @property
    def n_units(self):
        return len(self.irs_units)

    def led_xyz(self):
        return np.array([[p.x, p.y, p.z] for p in self.leds], dtype=float).reshape(-1, 3)

    def pd_xyz(self):
        return np.array([[p.x, p.y, p.z] for p in self.pds], dtype=float).reshape(-1, 3)

    def irs_xyz(self):
        return np.array([[p.x, p.y, p.z] for p in self.irs_units], dtype=float).reshape(-1, 3)


def build_scene(cfg: SceneConfig) -> Scene:
    """Place all devices from a :class:`SceneConfig`.

    LEDs occupy the centers of an ``nx x ny`` equal-area partition of the
    ceiling, ordered row-major with x fastest.  PDs form a horizontal
    uniform planar array centered on ``pd_center``.  Reflector units fill
    the wall rectangle on a uniform lattice with a half-cell margin,
    ordered with the horizontal wall axis fastest, then height.
    """
    w, d, h = cfg.room
    nx, ny = cfg.led_grid
    if nx * ny != cfg.n_leds:
        raise ValueError(f"LED grid {nx}x{ny} inconsistent with declared count {cfg.n_leds}")
    leds = [
        Point3((i + 0.5) * w / nx, (j + 0.5) * d / ny, h)
        for j in range(ny)
        for i in range(nx)
    ]

    gx, gy = cfg.pd_grid
    if gx * gy != cfg.n_pds:
        raise ValueError(f"PD grid {gx}x{gy} inconsistent with declared count {cfg.n_pds}")
    cx, cy, cz = cfg.pd_center
    pds = [
        Point3(cx + (i - (gx - 1) / 2.0) * cfg.pd_spacing, cy + (j - (gy - 1) / 2.0) * cfg.pd_spacing, cz)
        for j in range(gy)
        for i in range(gx)
    ]
    for p in pds:
        if not (0 <= p.x <= w and 0 <= p.y <= d and 0 <= p.z <= h):
            raise ValueError(f"PD array extends outside the room at ({p.x}, {p.y}, {p.z})")

    irs_units = _place_irs(cfg, w, d, h)
    return Scene(leds=leds, pds=pds, irs_units=irs_units, optics=cfg.optics, room_dims=(w, d, h))


def _place_irs(cfg, w, d, h):
    ga, gb = cfg.irs_grid
    if ga * gb != cfg.n_irs:
        raise ValueError(f"reflector grid {ga}x{gb} inconsistent with declared count {cfg.n_irs}")
    if cfg.n_irs == 0:
        return []
    (x0, y0, z0), (x1, y1, z1) = cfg.irs_rect
    if x0 == x1 and x0 in (0.0, w):
        lo, hi = sorted((y0, y1))
        make = lambda a, b: Point3(x0, a, b)
    elif y0 == y1 and y0 in (0.0, d):
        lo, hi = sorted((x0, x1))
        make = lambda a, b: Point3(a, y0, b)
    else:
        raise ValueError("reflector rectangle must lie on a single wall")
    zlo, zhi = sorted((z0, z1))
    da = (hi - lo) / ga
    db = (zhi - zlo) / gb
    return [
        make(lo + (ia + 0.5) * da, zlo + (ib + 0.5) * db)
        for ib in range(gb)
        for ia in range(ga)
    ]


def los_geometry(tx: Point3, rx: Point3) -> LinkGeometry:
    """Direct-path geometry between a source and a detector.

    With vertical normals the irradiance and incidence angles coincide:
    both equal arccos((tx.z - rx.z) / distance).
    """
    dx, dy, dz = rx.x - tx.x, rx.y - tx.y, rx.z - tx.z
    dist = math.sqrt(dx * dx + dy * dy + dz * dz)
    if dist == 0:
        raise ValueError("coincident endpoints give a zero-length link")
    ang = math.acos(max(-1.0, min(1.0, (tx.z - rx.z) / dist)))
    return LinkGeometry(dist, ang, ang)


def nlos_geometry(tx: Point3, unit: Point3, rx: Point3) -> tuple[LinkGeometry, LinkGeometry]:
    """Two-leg reflected-path geometry (source to unit, unit to detector)."""
    leg1 = los_geometry(tx, unit)
    leg2 = los_geometry(unit, rx)
    return leg1, leg2
