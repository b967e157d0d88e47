"""Perspective extrapolation of ARIR segments and of residual ARIRs.

Moving the listener from perspective ``x_i`` to ``x_d`` changes the
distance to a sound event at ``x_t`` from ``D_i`` to ``D_d``: the segment is
scaled by ``D_i / D_d``, advanced by ``dt = (D_i - D_d) / c`` and rotated so that
the event direction seen from ``x_i`` becomes the one seen from ``x_d``.
"""

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .core import SPEED_OF_SOUND
from .dsp import FD_TAPS, delay_signal
from .sh import rotation_align, sh_rotation

MAX_GAIN_DB = 24.0
_EPS_DIST = 1e-3


@dataclass
class Segment:
    """Windowed multichannel excerpt placed at sample `start`."""

    samples: np.ndarray
    start: int
    fade_in: int = 0
    fade_out: int = 0

    @property
    def stop(self):
        return self.start + self.samples.shape[1]

    @property
    def omni(self):
        return self.samples[0]


@dataclass
class TimeShiftMap:
    """Per-sample shift and its median-quantized piecewise-constant version.

    Attributes
    ----------
    raw : (T,) ndarray
        Advance ``(D_i - D_d) / c`` in seconds per sample.
    boundaries : list of int
        Segment start samples, beginning with 0.
    shifts : (K,) ndarray of int
        Quantized advance of each segment in samples.
    """

    raw: np.ndarray
    boundaries: list
    shifts: np.ndarray

    def quantized(self):
        """Per-sample quantized shifts in samples."""
        out = np.zeros(len(self.raw), dtype=int)
        edges = list(self.boundaries) + [len(self.raw)]
        for k, s in enumerate(self.shifts):
            out[edges[k]:edges[k + 1]] = s
        return out


def extrapolation_params(x_i, event, x_d, c=SPEED_OF_SOUND, max_gain_db=MAX_GAIN_DB):
    """Gain, time shift (s) and Cartesian rotation for one event.

    ``dt = (D_i - D_d) / c`` is positive when the event is closer to `x_d`,
    i.e. the content has to move earlier by `dt`.
    """
    x_i, event, x_d = (np.asarray(v, dtype=float) for v in (x_i, event, x_d))
    v_i, v_d = event - x_i, event - x_d
    D_i, D_d = np.linalg.norm(v_i), np.linalg.norm(v_d)
    if D_i < _EPS_DIST and D_d < _EPS_DIST:
        return 1.0, 0.0, np.eye(3)
    gain = min(D_i / max(D_d, 1e-12), 10 ** (max_gain_db / 20))
    dt = (D_i - D_d) / c
    if D_i < _EPS_DIST or D_d < _EPS_DIST:
        R = np.eye(3)
    else:
        R = rotation_align(v_i / D_i, v_d / D_d)
    return gain, dt, R


def extrapolate_segment(seg, x_i, event, x_d, sample_rate, c=SPEED_OF_SOUND,
                        fractional=False):
    """Move a segment from perspective `x_i` to `x_d` w.r.t. `event`.

    Integer shifts keep the samples; with ``fractional=True`` the
    sub-sample remainder is applied by a windowed-sinc delay and the
    segment grows by the kernel length.
    """
    gain, dt, R = extrapolation_params(x_i, event, x_d, c)
    order = int(round(np.sqrt(seg.samples.shape[0]))) - 1
    samples = gain * (sh_rotation(R, order) @ seg.samples)
    shift = -dt * sample_rate
    if not fractional:
        n = int(round(shift))
        return Segment(samples, seg.start + n, seg.fade_in, seg.fade_out)
    n = int(np.floor(shift))
    pad = FD_TAPS // 2
    padded = np.pad(samples, ((0, 0), (pad, pad)))
    return Segment(delay_signal(padded, shift - n), seg.start + n - pad,
                   seg.fade_in, seg.fade_out)


def instantaneous_positions(doas, x_i, sample_rate, c=SPEED_OF_SOUND, delay=0.0):
    """Per-sample event positions ``x_i + c (t - delay) theta(t)``."""
    dirs = doas.directions if hasattr(doas, "directions") else np.asarray(doas)
    t = np.arange(len(dirs)) / sample_rate - delay
    return np.asarray(x_i, dtype=float) + c * np.maximum(t, 0.0)[:, None] * dirs


def _shift_boundaries(raw, L):
    """Start samples of constant-shift segments from the slope extrema."""
    grad = np.abs(np.diff(raw))
    n = len(grad)
    if n == 0:
        return [0]
    scale = max(np.abs(raw).max(initial=0.0), 1e-300)
    pad = np.full(L - 1, -np.inf)
    ext = np.concatenate([pad, grad, pad])
    # all windows containing j cover [j - L + 1, j + L - 1]
    around = sliding_window_view(ext, 2 * L - 1).max(axis=1)
    before = sliding_window_view(ext[:-L], L - 1).max(axis=1) if L > 1 else np.full(n, -np.inf)
    keep = (grad >= around) & (grad > before) & (grad > 1e-12 * scale)
    # confirmed extrema are >= L apart; also keep the first one clear of 0
    return [0] + [int(j) + 1 for j in np.flatnonzero(keep) if j + 1 >= L]


def quantized_timeshift_map(positions, x_i, x_d, L=16, sample_rate=44100.0,
                            c=SPEED_OF_SOUND):
    """Piecewise-constant, median-quantized time shifts of a residual.

    Parameters
    ----------
    positions : (T, 3) ndarray
        Instantaneous event positions.
    L : int
        Sliding-window length; boundaries are at least `L` samples apart.
    """
    if L < 4:
        raise ValueError("window length must be >= 4")
    positions = np.asarray(positions, dtype=float)
    D_i = np.linalg.norm(positions - x_i, axis=1)
    D_d = np.linalg.norm(positions - x_d, axis=1)
    raw = (D_i - D_d) / c
    bounds = _shift_boundaries(raw, L)
    edges = bounds + [len(raw)]
    shifts = np.array([int(np.round(np.median(raw[a:b]) * sample_rate))
                       for a, b in zip(edges[:-1], edges[1:])], dtype=int)
    return TimeShiftMap(raw, bounds, shifts)


def _crossfade_windows(edges, n, half):
    """Partition-of-unity windows with cos^2 transitions around `edges`."""
    wins = []
    for k in range(len(edges) - 1):
        a, b = edges[k], edges[k + 1]
        lo = max(a - half, 0) if k > 0 else 0
        hi = min(b + half, n) if k < len(edges) - 2 else n
        w = np.ones(hi - lo)
        if k > 0 and half > 0:
            ramp = np.sin(np.pi * (np.arange(2 * half) + 0.5) / (4 * half)) ** 2
            seg = slice(a - half - lo, a + half - lo)
            w[seg] = ramp[: len(w[seg])]
        if k < len(edges) - 2 and half > 0:
            ramp = np.cos(np.pi * (np.arange(2 * half) + 0.5) / (4 * half)) ** 2
            seg = slice(b - half - lo, b + half - lo)
            w[seg] = ramp[: len(w[seg])]
        wins.append((lo, hi, w))
    return wins


def extrapolate_residual(residual, doas, x_i, x_d, limit=0.100, L=16,
                         c=SPEED_OF_SOUND, delay=0.0, max_gain_db=MAX_GAIN_DB):
    """Extrapolate a residual ARIR sample-wise to perspective `x_d`.

    Up to `limit` seconds of flight time every sample is attributed to an
    event at ``x_i + c t theta(t)``.  The gain follows per sample, while
    time shift and rotation are constant within the segments of the
    median-quantized shift map; segments are joined by cos^2 crossfades of
    ``L / 4`` samples.  The remainder passes through unchanged.

    Returns
    -------
    channels : (C, T) ndarray
    shift_map : TimeShiftMap
    """
    chans = residual.channels
    fs = residual.sample_rate
    n = chans.shape[1]
    x_i = np.asarray(x_i, dtype=float)
    x_d = np.asarray(x_d, dtype=float)
    n_lim = int(np.clip(round((limit + delay) * fs), 0, n))
    pos = instantaneous_positions(doas, x_i, fs, c, delay)[:n_lim]
    smap = quantized_timeshift_map(pos, x_i, x_d, L, fs, c) if n_lim else \
        TimeShiftMap(np.zeros(0), [], np.zeros(0, dtype=int))
    bounds = [b for b in smap.boundaries if b <= n_lim - L] if n_lim else []
    if bounds != list(smap.boundaries):
        smap = _requantize(smap, bounds, fs)
    D_i = np.linalg.norm(pos - x_i, axis=1)
    D_d = np.linalg.norm(pos - x_d, axis=1)
    gain = np.where((D_i < _EPS_DIST) & (D_d < _EPS_DIST), 1.0,
                    np.minimum(D_i / np.maximum(D_d, 1e-12), 10 ** (max_gain_db / 20)))
    edges = list(bounds) + ([n_lim] if n_lim < n else []) + [n]
    if edges[0] != 0:
        edges = [0] + edges
    order = residual.order
    rots = []
    for a, b in zip(bounds, list(bounds[1:]) + [n_lim]):
        med = np.median(pos[a:b], axis=0)
        v_i, v_d = med - x_i, med - x_d
        if np.linalg.norm(v_i) < _EPS_DIST or np.linalg.norm(v_d) < _EPS_DIST:
            rots.append(np.eye(3))
        else:
            rots.append(rotation_align(v_i / np.linalg.norm(v_i), v_d / np.linalg.norm(v_d)))
    rsp = sh_rotation(np.array(rots), order) if rots else np.zeros((0,))
    full_gain = np.ones(n)
    full_gain[:n_lim] = gain
    out = np.zeros_like(chans)
    for k, (lo, hi, w) in enumerate(_crossfade_windows(edges, n, max(L // 8, 1))):
        piece = chans[:, lo:hi] * (w * full_gain[lo:hi])[None, :]
        if k < len(bounds):
            piece = rsp[k] @ piece
            s = -int(smap.shifts[k])
        else:
            s = 0
        a, b = lo + s, hi + s
        ca, cb = max(a, 0), min(b, n)
        if cb > ca:
            out[:, ca:cb] += piece[:, ca - a:cb - a]
    return out, smap


def _requantize(smap, bounds, fs):
    edges = list(bounds) + [len(smap.raw)]
    shifts = np.array([int(np.round(np.median(smap.raw[a:b]) * fs))
                       for a, b in zip(edges[:-1], edges[1:])], dtype=int)
    return TimeShiftMap(smap.raw, list(bounds), shifts)
