"""Data model and grid geometry for ARIR grids."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .sh import order_of_channels, ypr_matrix

SPEED_OF_SOUND = 343.0


class OutsideGridWarning(UserWarning):
    """The listener lies outside the cell or grid used for interpolation."""


def unit(v, axis=-1):
    v = np.asarray(v, dtype=float)
    return v / np.linalg.norm(v, axis=axis, keepdims=True)


def as_direction(v, tol=1e-9):
    """Validate a unit 3-vector."""
    v = np.asarray(v, dtype=float)
    if v.shape[-1] != 3:
        raise ValueError("direction must be a 3-vector")
    if np.any(np.abs(np.linalg.norm(v, axis=-1) - 1.0) > tol):
        raise ValueError("direction is not unit-norm")
    return v


@dataclass
class Arir:
    """One Ambisonic room impulse response.

    Attributes
    ----------
    channels : (C, T) ndarray
        ACN-ordered, N3D-normalized SH channels.
    sample_rate : float
        Sampling rate in Hz.
    position : (3,) ndarray
        Capture position in meters.
    delay_compensated : bool
        True when ``t = 0`` corresponds to the emission time.
    """

    channels: np.ndarray
    sample_rate: float
    position: np.ndarray = field(default_factory=lambda: np.zeros(3))
    delay_compensated: bool = False

    def __post_init__(self):
        self.channels = np.atleast_2d(np.asarray(self.channels, dtype=float))
        self.position = np.asarray(self.position, dtype=float).reshape(3)
        self._order = order_of_channels(self.channels.shape[0])
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")

    @property
    def order(self):
        return self._order

    @property
    def n_samples(self):
        return self.channels.shape[1]

    @property
    def omni(self):
        return self.channels[0]

    def with_channels(self, channels, **kw):
        return replace(self, channels=channels, **kw)

    def padded(self, n_samples):
        """Zero-pad (never truncate) to `n_samples`."""
        extra = n_samples - self.n_samples
        if extra < 0:
            raise ValueError("cannot pad to a shorter length")
        if extra == 0:
            return self
        return self.with_channels(np.pad(self.channels, ((0, 0), (0, extra))))


class Lattice:
    """Horizontal square lattice of perspectives, indexed like the input."""

    def __init__(self, positions, spacing, tol=1e-3):
        self.positions = np.asarray(positions, dtype=float).reshape(-1, 3)
        self.spacing = float(spacing)
        if self.spacing <= 0:
            raise ValueError("spacing must be positive")
        if len(self.positions) == 0:
            raise ValueError("empty grid")
        z = self.positions[:, 2]
        if np.ptp(z) > 2 * tol:
            raise ValueError("grid positions are not on one horizontal plane")
        self.plane_height = float(np.mean(z))
        self.origin = self.positions[:, :2].min(axis=0)
        rel = (self.positions[:, :2] - self.origin) / self.spacing
        idx = np.round(rel).astype(int)
        if np.abs(rel - idx).max() * self.spacing > tol:
            raise ValueError("grid positions are not on a square lattice "
                             f"of spacing {self.spacing}")
        self.index = {tuple(ij): k for k, ij in enumerate(idx)}
        if len(self.index) != len(self.positions):
            raise ValueError("duplicate grid positions")
        self.ij = idx
        self.shape = tuple(idx.max(axis=0) + 1)

    def contains(self, point, tol=1e-9):
        p = np.asarray(point, dtype=float)[:2]
        lo = self.origin
        hi = self.origin + (np.array(self.shape) - 1) * self.spacing
        return bool(np.all(p >= lo - tol) and np.all(p <= hi + tol))

    def cell_corners(self, point):
        """Indices of the square cell containing `point` (or the nearest one)."""
        p = (np.asarray(point, dtype=float)[:2] - self.origin) / self.spacing
        nx, ny = self.shape
        cx = int(np.clip(np.floor(p[0] + 1e-12), 0, max(nx - 2, 0)))
        cy = int(np.clip(np.floor(p[1] + 1e-12), 0, max(ny - 2, 0)))
        corners = [(cx, cy), (cx + 1, cy), (cx, cy + 1), (cx + 1, cy + 1)]
        return [self.index[c] for c in corners if c in self.index]

    def select_triplet(self, point):
        """Three cell corners nearest to `point`, ties broken by lower index."""
        if len(self.positions) < 3:
            raise ValueError("need at least three perspectives")
        if not self.contains(point):
            warnings.warn("listener outside the grid; using the nearest cell",
                          OutsideGridWarning, stacklevel=2)
        corners = self.cell_corners(point)
        if len(corners) < 3:
            corners = list(range(len(self.positions)))
        p = np.asarray(point, dtype=float)[:2]
        dist = np.linalg.norm(self.positions[corners, :2] - p, axis=1)
        order = sorted(range(len(corners)),
                       key=lambda k: (round(dist[k], 9), corners[k]))
        return [corners[k] for k in order[:3]]

    def nearest(self, point):
        d = np.linalg.norm(self.positions[:, :2] - np.asarray(point)[:2], axis=1)
        return int(np.argmin(d))


def grid_weights(listener, positions, spacing):
    """Raised-cosine distance weights of a perspective triplet.

    ``g_i ~ cos^2(pi dx_i / 2r) cos^2(pi dy_i / 2r)``, renormalized to sum to
    one over the given perspectives.  Offsets beyond one spacing are clamped
    with an `OutsideGridWarning`.
    """
    listener = np.asarray(listener, dtype=float)
    positions = np.asarray(positions, dtype=float)
    off = np.abs(listener[:2] - positions[:, :2])
    if np.any(off > spacing * (1 + 1e-9)):
        warnings.warn("listener outside the interpolation cell; clamped",
                      OutsideGridWarning, stacklevel=2)
        off = np.minimum(off, spacing)
    raw = np.prod(np.cos(np.pi * off / (2 * spacing)) ** 2, axis=1)
    # cos(pi/2) is not exactly zero in floating point
    raw[np.any(off >= spacing * (1 - 1e-12), axis=1)] = 0.0
    total = raw.sum()
    if total <= 0:
        # only reachable after clamping: fall back to the nearest perspective
        raw = np.zeros(len(positions))
        raw[np.argmin(np.linalg.norm(positions[:, :2] - listener[:2], axis=1))] = 1
        total = 1.0
    return raw / total


@dataclass
class ArirGrid:
    """ARIRs on a horizontal, equidistant square grid."""

    arirs: list
    spacing: float
    speed_of_sound: float = SPEED_OF_SOUND
    source_position: np.ndarray | None = None
    system_delay: float | None = None

    def __post_init__(self):
        if not self.arirs:
            raise ValueError("grid has no ARIRs")
        a0 = self.arirs[0]
        for a in self.arirs:
            if a.sample_rate != a0.sample_rate:
                raise ValueError("ARIRs have different sample rates")
            if a.order != a0.order:
                raise ValueError("ARIRs have different SH orders")
            if a.n_samples != a0.n_samples:
                raise ValueError("ARIRs have different lengths")
        self.lattice = Lattice(self.positions, self.spacing)

    @property
    def positions(self):
        return np.array([a.position for a in self.arirs])

    @property
    def sample_rate(self):
        return self.arirs[0].sample_rate

    @property
    def order(self):
        return self.arirs[0].order

    @property
    def n_samples(self):
        return self.arirs[0].n_samples

    @property
    def plane_height(self):
        return self.lattice.plane_height

    def __len__(self):
        return len(self.arirs)

    def select_triplet(self, listener):
        return self.lattice.select_triplet(listener)


def select_triplet(listener, grid):
    return grid.select_triplet(listener)


@dataclass
class ListenerPose:
    """Listener translation (m) and head orientation (yaw, pitch, roll in rad)."""

    position: np.ndarray
    yaw_pitch_roll: tuple = (0.0, 0.0, 0.0)

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=float).reshape(3)
        self.yaw_pitch_roll = tuple(float(a) for a in self.yaw_pitch_roll)

    @classmethod
    def parse(cls, text):
        """Parse ``"x,y,z[,yaw,pitch,roll]"`` (metres, angles in degrees)."""
        vals = [float(v) for v in text.split(",")]
        if len(vals) not in (3, 6):
            raise ValueError("pose needs 3 or 6 comma-separated values")
        return cls(vals[:3], tuple(np.radians(vals[3:])) or (0.0, 0.0, 0.0))

    def head_rotation(self):
        """Cartesian head rotation ``Rz(yaw) Ry(pitch) Rx(roll)``."""
        return ypr_matrix(*self.yaw_pitch_roll)

    def scene_rotation(self):
        """Rotation applied to the sound field: the inverse head rotation."""
        return self.head_rotation().T

    def check_inside(self, lattice):
        if not lattice.contains(self.position):
            warnings.warn("listener pose outside the grid hull",
                          OutsideGridWarning, stacklevel=2)
