"""Measurements on ARIRs used for validation against analytic ground truth."""

from dataclasses import dataclass

import numpy as np

from .filterbank import ThirdOctaveBank


@dataclass
class Arrival:
    """Measured arrival: TOA (s), unit DOA and amplitude."""

    toa: float
    doa: np.ndarray
    level: float


def measure_arrival(arir, t_expected, search=0.5e-3, doa_half=0.25e-3, level_half=16):
    """Measure the strongest omni arrival within `search` s of `t_expected`.

    The TOA is the parabolic refinement of the ``|omni|`` maximum, the DOA the
    normalized broadband pseudo-intensity summed over ``+-doa_half`` and the
    level the RMS-equivalent amplitude ``sqrt(sum omni^2)`` over
    ``+-level_half`` samples.
    """
    fs = arir.sample_rate
    h = arir.omni
    k0 = int(round(t_expected * fs))
    half = int(round(search * fs))
    lo, hi = max(k0 - half, 0), min(k0 + half + 1, len(h))
    k = lo + int(np.argmax(np.abs(h[lo:hi])))
    frac = 0.0
    if 0 < k < len(h) - 1:
        a, b, c = np.abs(h[k - 1:k + 2])
        den = a - 2 * b + c
        if den < 0:
            frac = float(np.clip(0.5 * (a - c) / den, -0.5, 0.5))
    dh = int(round(doa_half * fs))
    sl = slice(max(k - dh, 0), k + dh + 1)
    chans = arir.channels
    v = (chans[0, sl] * chans[[3, 1, 2], sl]).sum(axis=1)
    doa = v / np.linalg.norm(v) if np.linalg.norm(v) > 0 else np.array([1.0, 0, 0])
    ls = slice(max(k - level_half, 0), k + level_half + 1)
    level = float(np.sqrt(np.sum(h[ls] ** 2)))
    return Arrival((k + frac) / fs, doa, level)


def angle_deg(u, v):
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    cosang = np.dot(u, v) / (np.linalg.norm(u) * np.linalg.norm(v))
    return float(np.degrees(np.arccos(np.clip(cosang, -1.0, 1.0))))


def band_levels_db(signal, sample_rate, bank=None):
    """Third-octave band energies (dB) of a single channel."""
    bank = bank or ThirdOctaveBank(sample_rate)
    bands = bank.analyze(np.asarray(signal, dtype=float))
    return 10 * np.log10(np.maximum(np.sum(bands ** 2, axis=-1), 1e-300))


def broadband_level_db(signal):
    return float(10 * np.log10(max(np.sum(np.asarray(signal) ** 2), 1e-300)))


def magnitude_response_db(h, n_fft, sample_rate):
    """Frequencies and magnitude response in dB of an impulse response."""
    H = np.fft.rfft(h, n_fft)
    return np.fft.rfftfreq(n_fft, 1 / sample_rate), 20 * np.log10(np.maximum(np.abs(H), 1e-300))
