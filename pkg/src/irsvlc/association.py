"""Reflector-unit association matrices and their conversions.

An assignment pairs each unit with at most one PD (matrix f) and at most
one LED (matrix g).  The columnwise Hadamard products of f and g stack
into the allocation matrix V whose column p = pd + led * n_pds addresses
one (PD, LED) pair; rows of a valid binary V are one-hot or zero.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .scene import Scene

__all__ = [
    "Assignment",
    "RelaxedV",
    "to_v",
    "recover_assignment",
    "distance_greedy",
    "random_assignment",
    "validate_assignment",
    "save_assignment",
    "load_assignment",
]


@dataclass
class Assignment:
    """Binary unit-to-PD (f) and unit-to-LED (g) matrices."""

    f: np.ndarray  # n_units x n_pds
    g: np.ndarray  # n_units x n_leds

    def __post_init__(self):
        self.f = np.asarray(self.f)
        self.g = np.asarray(self.g)
        if self.f.ndim != 2 or self.g.ndim != 2 or self.f.shape[0] != self.g.shape[0]:
            raise ValueError("f and g must be matrices with one row per unit")

    @property
    def n_units(self):
        return self.f.shape[0]

    @property
    def n_pds(self):
        return self.f.shape[1]

    @property
    def n_leds(self):
        return self.g.shape[1]


@dataclass
class RelaxedV:
    """Allocation matrix with entries in [0, 1] and row sums at most 1."""

    v: np.ndarray  # n_units x (n_leds * n_pds)
    n_leds: int
    n_pds: int

    def __post_init__(self):
        self.v = np.asarray(self.v, dtype=float)
        if self.v.shape != (self.v.shape[0], self.n_leds * self.n_pds):
            raise ValueError("allocation width must equal n_leds * n_pds")


def to_v(a: Assignment) -> np.ndarray:
    """Binary allocation matrix: column pd + led * n_pds is f[:, pd] * g[:, led]."""
    # index [n, led, pd] flattens row-major to column led * n_pds + pd
    v = (a.g[:, :, None] * a.f[:, None, :]).reshape(a.n_units, a.n_leds * a.n_pds)
    return v.astype(float)


def recover_assignment(relaxed: RelaxedV) -> Assignment:
    """Round each unit to the pair with the largest allocation.

    Per row the argmax column p gives led = p // n_pds and pd = p % n_pds
    (ties and all-zero rows resolve to the smallest column index).
    """
    n = relaxed.v.shape[0]
    f = np.zeros((n, relaxed.n_pds), dtype=int)
    g = np.zeros((n, relaxed.n_leds), dtype=int)
    if n:
        best = np.argmax(relaxed.v, axis=1)
        f[np.arange(n), best % relaxed.n_pds] = 1
        g[np.arange(n), best // relaxed.n_pds] = 1
    return Assignment(f=f, g=g)


def distance_greedy(scene: Scene) -> Assignment:
    """Assign every unit to its nearest PD and nearest LED (ties to the
    smallest index)."""
    n = scene.n_units
    f = np.zeros((n, scene.n_pds), dtype=int)
    g = np.zeros((n, scene.n_leds), dtype=int)
    if n:
        units = scene.irs_xyz()
        d_pd = np.linalg.norm(units[:, None, :] - scene.pd_xyz()[None, :, :], axis=2)
        d_led = np.linalg.norm(units[:, None, :] - scene.led_xyz()[None, :, :], axis=2)
        f[np.arange(n), np.argmin(d_pd, axis=1)] = 1
        g[np.arange(n), np.argmin(d_led, axis=1)] = 1
    return Assignment(f=f, g=g)


def random_assignment(scene: Scene, seed: int) -> Assignment:
    """Draw each unit's (PD, LED) pair uniformly, deterministic in the seed."""
    return _random_assignment_dims(scene.n_units, scene.n_leds, scene.n_pds, seed)


def _random_assignment_dims(n_units, n_leds, n_pds, seed):
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    f = np.zeros((n_units, n_pds), dtype=int)
    g = np.zeros((n_units, n_leds), dtype=int)
    if n_units:
        cols = rng.integers(0, n_leds * n_pds, size=n_units)
        f[np.arange(n_units), cols % n_pds] = 1
        g[np.arange(n_units), cols // n_pds] = 1
    return Assignment(f=f, g=g)


def validate_assignment(a: Assignment) -> list[str]:
    """Report constraint violations; an empty list means the assignment is valid."""
    issues = []
    for name, mat, what in (("f", a.f, "PDs"), ("g", a.g, "LEDs")):
        binary = np.isin(mat, (0, 1))
        for row in np.nonzero(~binary.all(axis=1))[0]:
            issues.append(f"{name}[{row}]: non-binary entry")
        sums = mat.sum(axis=1)
        for row in np.nonzero(sums > 1)[0]:
            if binary[row].all():
                issues.append(f"{name}[{row}]: row sum {sums[row]} exceeds 1 (unit tied to multiple {what})")
    return issues


def save_assignment(a: Assignment, path):
    """Write one CSV row per unit: unit, led, pd (1-based, 0 = unassigned)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["unit", "led", "pd"])
        for n in range(a.n_units):
            led = int(np.argmax(a.g[n])) + 1 if a.g[n].any() else 0
            pd = int(np.argmax(a.f[n])) + 1 if a.f[n].any() else 0
            writer.writerow([n + 1, led, pd])


def load_assignment(path, n_units, n_leds, n_pds) -> Assignment:
    f = np.zeros((n_units, n_pds), dtype=int)
    g = np.zeros((n_units, n_leds), dtype=int)
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if len(rows) != n_units:
        raise ValueError(f"expected {n_units} rows, found {len(rows)}")
    for row in rows:
        n, led, pd = int(row["unit"]) - 1, int(row["led"]), int(row["pd"])
        if not 0 <= n < n_units:
            raise ValueError(f"unit index {n + 1} out of range")
        if not 0 <= led <= n_leds or not 0 <= pd <= n_pds:
            raise ValueError(f"unit {n + 1}: assignment ({led}, {pd}) out of range")
        if led:
            g[n, led - 1] = 1
        if pd:
            f[n, pd - 1] = 1
    return Assignment(f=f, g=g)
