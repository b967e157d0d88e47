"""Pseudo-intensity direction of arrival and directional envelope."""

from dataclasses import dataclass

import numpy as np
from scipy.signal import butter, sosfiltfilt
from scipy.signal.windows import hamming

from .dsp import centered_average, odd_length

BAND = (200.0, 3000.0)
PAD = 512
INVALID_REL = 1e-12


@dataclass
class DoaTrajectory:
    """Per-sample unit DOA vectors ``(T, 3)`` and a validity mask ``(T,)``."""

    directions: np.ndarray
    valid: np.ndarray


def _first_order(channels):
    channels = np.asarray(channels, dtype=float)
    if channels.shape[0] < 4:
        raise ValueError("DOA analysis needs at least first-order channels")
    w = channels[0]
    xyz = channels[[3, 1, 2]]     # ACN 3, 1, 2 are x, y, z
    return w, xyz


def pseudo_intensity(channels, sample_rate, band=BAND, smooth_samples=None):
    """Band-limited, smoothed pseudo-intensity vector ``(T, 3)``."""
    w, xyz = _first_order(channels)
    sos = butter(2, band, btype="bandpass", fs=sample_rate, output="sos")
    sig = np.vstack([w, xyz])
    sig = np.pad(sig, ((0, 0), (PAD, PAD)))
    sig = sosfiltfilt(sos, sig, axis=-1)[:, PAD:-PAD]
    inten = sig[0] * sig[1:]
    if smooth_samples is None:
        smooth_samples = 10 * sample_rate / 44100.0
    return centered_average(inten, odd_length(smooth_samples)).T


def doa_trajectory(arir, band=BAND, smooth_samples=None):
    """Per-sample DOA from the zeroth- and first-order channels.

    Samples whose intensity magnitude is below ``1e-12`` of the maximum are
    flagged invalid and keep the last valid direction (``+x`` before the
    first valid sample).
    """
    inten = pseudo_intensity(arir.channels, arir.sample_rate, band, smooth_samples)
    mag = np.linalg.norm(inten, axis=1)
    peak = mag.max(initial=0.0)
    valid = mag > INVALID_REL * peak if peak > 0 else np.zeros(len(mag), bool)
    dirs = np.empty_like(inten)
    dirs[valid] = inten[valid] / mag[valid, None]
    # forward-fill invalid samples
    idx = np.where(valid, np.arange(len(mag)), -1)
    idx = np.maximum.accumulate(idx) if len(idx) else idx
    dirs[idx < 0] = (1.0, 0.0, 0.0)
    dirs[idx >= 0] = dirs[idx[idx >= 0]]
    return DoaTrajectory(dirs, valid)


def directional_envelope(arir, window=0.5e-3):
    """Smoothed magnitude of the broadband pseudo-intensity vector.

    ``a(t) = sqrt(F_H{|W(t) [X, Y, Z](t)|})`` with a Hamming-weighted moving
    average over `window` seconds.
    """
    w, xyz = _first_order(arir.channels)
    mag = np.linalg.norm(w * xyz, axis=0)
    n = odd_length(window * arir.sample_rate)
    smooth = centered_average(mag, n, window=hamming)
    return np.sqrt(np.maximum(smooth, 0.0))
