"""Zero-phase third-octave filter bank and short-time band-energy correction.

The bank is defined in the frequency domain: neighbouring bands cross over
with complementary raised-cosine slopes on a log-frequency axis, so the band
responses are real, non-negative and sum to exactly one at every frequency.
"""

import numpy as np
from scipy.fft import irfft, next_fast_len, rfft, rfftfreq

from .sh import order_slices


class ThirdOctaveBank:
    """Perfectly reconstructing base-2 third-octave bank.

    Parameters
    ----------
    sample_rate : float
    f_min : float
        Lowest admissible band center.
    f_max_ratio : float
        Highest band center as a fraction of Nyquist.
    """

    def __init__(self, sample_rate, f_min=50.0, f_max_ratio=0.9):
        self.sample_rate = float(sample_rate)
        f_max = f_max_ratio * sample_rate / 2
        k_lo = int(np.ceil(3 * np.log2(f_min / 1000.0) - 1e-9))
        k_hi = int(np.floor(3 * np.log2(f_max / 1000.0) + 1e-9))
        self.centers = 1000.0 * 2.0 ** (np.arange(k_lo, k_hi + 1) / 3)
        self._cache = {}

    @property
    def n_bands(self):
        return len(self.centers)

    def responses(self, n_fft):
        """Band magnitude responses ``(B, n_fft // 2 + 1)``; columns sum to 1."""
        if n_fft in self._cache:
            return self._cache[n_fft]
        f = rfftfreq(n_fft, 1 / self.sample_rate)
        logf = np.log2(np.maximum(f, 1e-12))
        logc = np.log2(self.centers)
        # low-pass steps between consecutive centers
        steps = []
        for lo, hi in zip(logc[:-1], logc[1:]):
            x = np.clip((logf - lo) / (hi - lo), 0.0, 1.0)
            steps.append(np.cos(np.pi * x / 2) ** 2)
        steps = [np.zeros_like(f)] + steps + [np.ones_like(f)]
        resp = np.array([steps[k + 1] - steps[k] for k in range(self.n_bands)])
        self._cache[n_fft] = resp
        return resp

    def analyze(self, x):
        """Split `x` along its last axis into bands; returns ``(B, ..., T)``."""
        x = np.asarray(x, dtype=float)
        n = x.shape[-1]
        n_fft = next_fast_len(2 * n)
        X = rfft(x, n_fft, axis=-1)
        H = self.responses(n_fft)
        shape = (self.n_bands,) + (1,) * (x.ndim - 1) + (H.shape[-1],)
        bands = irfft(X[None] * H.reshape(shape), n_fft, axis=-1)
        return bands[..., :n]


def frame_grid(n_samples, sample_rate, hop=0.005):
    hop_n = max(int(round(hop * sample_rate)), 1)
    centers = np.arange(0, n_samples + hop_n, hop_n)
    return centers, hop_n


def frame_power(x, centers, win_n):
    """Mean of ``x**2`` over `win_n` samples centered at each frame center."""
    x = np.asarray(x, dtype=float)
    n = x.shape[-1]
    csum = np.concatenate([np.zeros(x.shape[:-1] + (1,)), np.cumsum(x ** 2, axis=-1)], axis=-1)
    lo = np.clip(centers - win_n // 2, 0, n)
    hi = np.clip(centers + win_n // 2 + 1, 0, n)
    return (csum[..., hi] - csum[..., lo]) / (2 * (win_n // 2) + 1)


def band_frame_power(x, bank, avg=0.01, hop=0.005):
    """Short-time band powers ``(B, ..., F)`` of `x` and the frame centers."""
    x = np.asarray(x, dtype=float)
    centers, _ = frame_grid(x.shape[-1], bank.sample_rate, hop)
    win_n = max(int(round(avg * bank.sample_rate)), 1)
    return frame_power(bank.analyze(x), centers, win_n), centers


def _smooth_frames(g):
    if g.shape[-1] < 3:
        return g
    out = g.copy()
    out[..., 1:-1] = 0.25 * g[..., :-2] + 0.5 * g[..., 1:-1] + 0.25 * g[..., 2:]
    return out


def envelope_correction(channels, target, bank, avg=0.01, hop=0.005,
                        on_zero=0.0, max_gain_db=None, rel_floor=1e-12):
    """Rescale short-time band energies of an SH signal per order.

    Parameters
    ----------
    channels : (C, T) ndarray
        ACN SH signal.
    target : (N+1, B, F) ndarray
        Desired short-time band power per order, summed over the degrees of
        that order, on the frame grid of :func:`band_frame_power`.
    on_zero : float
        Gain used where the target power vanishes.
    max_gain_db : float, optional
        Upper gain limit.

    Returns
    -------
    corrected : (C, T) ndarray
    gains : (N+1, B, F) ndarray
        Per-frame gains before smoothing.
    """
    channels = np.asarray(channels, dtype=float)
    n_ch, n = channels.shape
    order = int(round(np.sqrt(n_ch))) - 1
    centers, _ = frame_grid(n, bank.sample_rate, hop)
    win_n = max(int(round(avg * bank.sample_rate)), 1)
    out = np.empty_like(channels)
    all_gains = np.empty((order + 1, bank.n_bands, len(centers)))
    t = np.arange(n)
    for k, sl in enumerate(order_slices(order)):
        bands = bank.analyze(channels[sl])              # (B, 2k+1, T)
        actual = frame_power(bands, centers, win_n).sum(axis=1)
        want = np.asarray(target[k])
        floor = rel_floor * max(want.max(initial=0.0), actual.max(initial=0.0), 1e-300)
        gain = np.ones_like(actual)
        live = actual > floor
        gain[live] = np.sqrt(np.maximum(want[live], 0.0) / actual[live])
        gain[want <= floor] = on_zero
        if max_gain_db is not None:
            gain = np.minimum(gain, 10 ** (max_gain_db / 20))
        all_gains[k] = gain
        smooth = _smooth_frames(gain)
        per_sample = np.array([np.interp(t, centers, g) for g in smooth])
        out[sl] = np.einsum("bt,bct->ct", per_sample, bands)
    return out, all_gains
