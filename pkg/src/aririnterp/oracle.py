"""Image-source shoebox simulator producing ARIR grids with known geometry."""

import itertools
import warnings
from dataclasses import dataclass

import numpy as np

from .core import SPEED_OF_SOUND, Arir, ArirGrid
from .dsp import FD_TAPS, fractional_delay_kernel
from .sh import n_channels, sh_eval

WALLS = ("x0", "x1", "y0", "y1", "z0", "z1")


@dataclass
class ShoeboxRoom:
    """Rectangular room spanning ``[0, Lx] x [0, Ly] x [0, Lz]``.

    Attributes
    ----------
    dimensions : (3,) array_like
        Room size in meters.
    absorption : float or sequence of 6 floats
        Energy absorption per wall, ordered x0, x1, y0, y1, z0, z1.
    max_reflection_order : int
        Default image order for simulations.
    """

    dimensions: np.ndarray
    absorption: object = 0.2
    max_reflection_order: int = 10

    def __post_init__(self):
        self.dimensions = np.asarray(self.dimensions, dtype=float).reshape(3)
        if np.any(self.dimensions <= 0):
            raise ValueError("room dimensions must be positive")
        alpha = np.broadcast_to(np.asarray(self.absorption, dtype=float), (6,)).copy()
        if np.any((alpha < 0) | (alpha > 1)):
            raise ValueError("absorption must lie in [0, 1]")
        self.absorption = alpha

    @property
    def reflection_factors(self):
        return np.sqrt(1.0 - self.absorption)

    @property
    def volume(self):
        return float(np.prod(self.dimensions))

    def contains(self, p, margin=0.0):
        p = np.asarray(p, dtype=float)
        return bool(np.all(p > margin) and np.all(p < self.dimensions - margin))

    def sabine_t60(self):
        lx, ly, lz = self.dimensions
        areas = np.array([ly * lz, ly * lz, lx * lz, lx * lz, lx * ly, lx * ly])
        a = float(np.sum(areas * self.absorption))
        return np.inf if a <= 0 else 0.161 * self.volume / a


@dataclass
class ImageSource:
    """Mirror image of the source.

    Attributes
    ----------
    position : (3,) ndarray
    reflection_gain : float
        Product of the reflection factors of all walls hit.
    order : int
        Number of reflections.
    index : tuple of int
        Lattice index ``(nx, ny, nz)``.
    """

    position: np.ndarray
    reflection_gain: float
    order: int
    index: tuple = (0, 0, 0)

    def gain_at(self, receiver):
        return self.reflection_gain / np.linalg.norm(self.position - receiver)


def _axis_image(n, length, coord):
    """Coordinate and wall hit counts ``(low, high)`` of 1-D image index `n`."""
    if n % 2 == 0:
        pos = n * length + coord
    else:
        pos = (n + 1) * length - coord
    k = abs(n)
    if n > 0:
        hits = (k // 2, (k + 1) // 2)
    else:
        hits = ((k + 1) // 2, k // 2)
    return pos, hits


def image_sources(room, source, max_order=None):
    """All image sources up to `max_order` reflections, sorted by order.

    Raises
    ------
    ValueError
        If the source is not strictly inside the room.
    """
    source = np.asarray(source, dtype=float).reshape(3)
    if not room.contains(source):
        raise ValueError("source must lie strictly inside the room")
    K = room.max_reflection_order if max_order is None else int(max_order)
    beta = room.reflection_factors
    out = []
    rng = range(-K, K + 1)
    for nx, ny, nz in itertools.product(rng, rng, rng):
        order = abs(nx) + abs(ny) + abs(nz)
        if order > K:
            continue
        pos = np.empty(3)
        gain = 1.0
        for ax, n in enumerate((nx, ny, nz)):
            pos[ax], (lo, hi) = _axis_image(n, room.dimensions[ax], source[ax])
            gain *= beta[2 * ax] ** lo * beta[2 * ax + 1] ** hi
        out.append(ImageSource(pos, gain, order, (nx, ny, nz)))
    out.sort(key=lambda im: (im.order, im.index))
    return out


def arrivals(images, receiver, c=SPEED_OF_SOUND):
    """Analytic TOA (s), unit DOA and amplitude of each image at `receiver`."""
    receiver = np.asarray(receiver, dtype=float)
    pos = np.array([im.position for im in images])
    vec = pos - receiver
    dist = np.linalg.norm(vec, axis=1)
    gains = np.array([im.reflection_gain for im in images])
    with np.errstate(divide="ignore", invalid="ignore"):
        return dist / c, vec / dist[:, None], gains / dist


def _add_impulse(buf, t, weights):
    """Add `weights` (C,) times a fractional-delay impulse at sample `t`."""
    n_int = int(np.floor(t))
    kern = fractional_delay_kernel(t - n_int)
    idx = n_int + np.arange(FD_TAPS) - (FD_TAPS // 2 - 1)
    ok = (idx >= 0) & (idx < buf.shape[1])
    buf[:, idx[ok]] += weights[:, None] * kern[ok][None, :]


def simulate_arir(room, source, receiver, order, sample_rate, n_samples,
                  max_order=None, c=SPEED_OF_SOUND, system_delay=0.0,
                  images=None, diffuse=None, rng=None):
    """Simulate one ARIR by the image-source method.

    Parameters
    ----------
    room : ShoeboxRoom
    source, receiver : (3,) array_like
    order : int
        SH order of the encoding.
    sample_rate : float
    n_samples : int
    max_order : int, optional
        Image order; defaults to ``room.max_reflection_order``.
    system_delay : float
        Uniform latency in seconds added to every arrival.
    images : list of ImageSource, optional
        Precomputed images of `source`.
    diffuse : float, optional
        Start time (s) of an exponentially decaying noise tail whose T60 is
        the Sabine estimate of the room; omitted when None.
    rng : numpy.random.Generator, optional
        Noise generator for the diffuse tail.
    """
    receiver = np.asarray(receiver, dtype=float).reshape(3)
    if not room.contains(receiver):
        raise ValueError("receiver must lie inside the room")
    if images is None:
        images = image_sources(room, source, max_order)
    toa, doa, amp = arrivals(images, receiver, c)
    buf = np.zeros((n_channels(order), n_samples))
    close = ~np.isfinite(amp) | (toa * c < 1e-6)
    if np.any(close):
        warnings.warn("receiver coincides with an image source; skipped",
                      RuntimeWarning, stacklevel=2)
    keep = ~close & ((toa + system_delay) * sample_rate < n_samples + FD_TAPS)
    Y = sh_eval(doa[keep], order)
    for t, a, y in zip((toa[keep] + system_delay) * sample_rate, amp[keep], Y):
        _add_impulse(buf, t, a * y)
    if diffuse is not None:
        buf += _diffuse_tail(room, buf, diffuse, sample_rate, order, rng)
    return Arir(buf, sample_rate, receiver, delay_compensated=system_delay == 0)


def _diffuse_tail(room, buf, start, fs, order, rng):
    """Noise tail with equal N3D variance per channel and Sabine decay.

    Its initial power matches the omni power of the image-source response
    over the 20 ms before `start`.
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    n = buf.shape[1]
    s = int(round(start * fs))
    if s >= n:
        return np.zeros_like(buf)
    ref = buf[0, max(s - int(0.02 * fs), 0):s]
    p0 = float(np.mean(ref ** 2)) if len(ref) else 0.0
    t60 = room.sabine_t60()
    t = np.arange(n - s) / fs
    env = np.sqrt(p0) * 10 ** (-3 * t / t60)
    tail = np.zeros_like(buf)
    tail[:, s:] = rng.standard_normal((buf.shape[0], n - s)) * env
    fade = min(int(0.005 * fs), n - s)
    tail[:, s:s + fade] *= np.sin(np.pi * (np.arange(fade) + 0.5) / (2 * fade)) ** 2
    return tail


def lattice_positions(origin, shape, spacing, height):
    """Row-major (x fastest) square lattice of receiver positions."""
    nx, ny = shape
    return np.array([[origin[0] + i * spacing, origin[1] + j * spacing, height]
                     for j in range(ny) for i in range(nx)])


def simulate_grid(room, source, positions, spacing, order=1, sample_rate=44100.0,
                  duration=0.25, max_order=None, c=SPEED_OF_SOUND,
                  system_delay=0.0, diffuse=None, seed=0):
    """Simulate ARIRs at every position of a horizontal square lattice."""
    source = np.asarray(source, dtype=float).reshape(3)
    images = image_sources(room, source, max_order)
    n_samples = int(round(duration * sample_rate))
    rng = np.random.default_rng(seed)
    arirs = [simulate_arir(room, source, p, order, sample_rate, n_samples,
                           c=c, system_delay=system_delay, images=images,
                           diffuse=diffuse, rng=rng)
             for p in np.asarray(positions, dtype=float)]
    return ArirGrid(arirs, spacing, c, source, None)
