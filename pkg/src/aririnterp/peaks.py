"""Detection of prominent early peaks of the directional envelope."""

from dataclasses import dataclass

import numpy as np
from scipy.signal import find_peaks

from .doa import directional_envelope, doa_trajectory


@dataclass
class Peak:
    """A detected peak.

    Attributes
    ----------
    toa : float
        Time of arrival in seconds (sub-sample, parabolic refinement).
    doa : (3,) ndarray
        Unit direction of arrival.
    magnitude : float
        Envelope value at the peak sample.
    perspective : int
        Index of the grid perspective the peak belongs to.
    sample : int
        Integer peak sample.
    """

    toa: float
    doa: np.ndarray
    magnitude: float
    perspective: int = 0
    sample: int = 0


@dataclass
class PeakDetectConfig:
    """Peak picking thresholds.

    Attributes
    ----------
    prominence_db : float
        Minimum topographic prominence of the envelope in dB.
    floor_db : float
        Minimum level relative to the envelope maximum.
    early_window : float
        Peaks are kept up to this long after the direct sound (s).
    direct_db : float
        The direct sound is the earliest peak within this many dB of the
        envelope maximum.
    min_distance : float
        Minimum peak spacing in seconds.
    doa_window : float
        Half width (s) of the envelope-weighted DOA average.
    doa_band : (float, float)
        Pass band (Hz) of the DOA estimator.
    """

    prominence_db: float = 6.0
    floor_db: float = -40.0
    early_window: float = 0.075
    direct_db: float = -6.0
    min_distance: float = 0.5e-3
    doa_window: float = 0.25e-3
    doa_band: tuple = (200.0, 3000.0)

    def __post_init__(self):
        self.doa_band = tuple(float(f) for f in self.doa_band)
        if self.prominence_db <= 0:
            raise ValueError("prominence_db must be positive")


def _parabolic(y, k):
    if k <= 0 or k >= len(y) - 1:
        return 0.0
    a, b, c = y[k - 1], y[k], y[k + 1]
    den = a - 2 * b + c
    if den >= 0:
        return 0.0
    return float(np.clip(0.5 * (a - c) / den, -0.5, 0.5))


def peak_doa(doas, envelope, k, half):
    lo, hi = max(k - half, 0), min(k + half + 1, len(envelope))
    v = (envelope[lo:hi, None] * doas.directions[lo:hi]).sum(axis=0)
    norm = np.linalg.norm(v)
    return v / norm if norm > 0 else doas.directions[k].copy()


def detect_peaks(envelope, doas, sample_rate, cfg=None, perspective=0,
                 direct_toa=None):
    """Prominent early peaks of `envelope`, sorted by descending magnitude.

    Parameters
    ----------
    envelope : (T,) ndarray
        Directional envelope.
    doas : DoaTrajectory
    sample_rate : float
    cfg : PeakDetectConfig, optional
    perspective : int
        Stored on every returned peak.
    direct_toa : float, optional
        Direct-sound time in seconds; estimated from the envelope if omitted.

    Returns
    -------
    list of Peak
    """
    cfg = cfg or PeakDetectConfig()
    envelope = np.asarray(envelope, dtype=float)
    top = envelope.max(initial=0.0)
    if top <= 0:
        return []
    level = 20 * np.log10(np.maximum(envelope, top * 1e-15) / top)
    dist = max(int(round(cfg.min_distance * sample_rate)), 1)
    idx, _ = find_peaks(level, height=cfg.floor_db, prominence=cfg.prominence_db,
                        distance=dist)
    if len(idx) == 0:
        return []
    subs = np.array([k + _parabolic(level, k) for k in idx])
    if direct_toa is None:
        strong = idx[level[idx] >= cfg.direct_db]
        direct_toa = subs[list(idx).index(strong[0])] / sample_rate
    t_lo = direct_toa - 0.5 / sample_rate
    t_hi = direct_toa + cfg.early_window
    half = int(round(cfg.doa_window * sample_rate))
    out = []
    for k, s in zip(idx, subs):
        t = s / sample_rate
        if t_lo <= t <= t_hi:
            out.append(Peak(t, peak_doa(doas, envelope, k, half),
                            float(envelope[k]), perspective, int(k)))
    out.sort(key=lambda p: (-p.magnitude, p.toa))
    return out


def analyze_peaks(arir, cfg=None, perspective=0, direct_toa=None):
    """Envelope, DOA trajectory and peaks of one ARIR."""
    cfg = cfg or PeakDetectConfig()
    env = directional_envelope(arir)
    doas = doa_trajectory(arir, tuple(cfg.doa_band))
    peaks = detect_peaks(env, doas, arir.sample_rate, cfg, perspective, direct_toa)
    return env, doas, peaks


def direct_peak(peaks):
    """The earliest peak of a list (the direct sound after detection)."""
    return min(peaks, key=lambda p: p.toa) if peaks else None
