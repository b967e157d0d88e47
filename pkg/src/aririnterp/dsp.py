"""Small signal-processing helpers shared across the pipeline."""

import numpy as np
from scipy.ndimage import convolve1d
from scipy.signal import fftconvolve
from scipy.special import i0

FD_TAPS = 32
_KAISER_BETA = 6.0


def fractional_delay_kernel(frac, n_taps=FD_TAPS):
    """Kaiser-windowed sinc for a delay of ``frac`` samples, ``0 <= frac < 1``.

    Tap ``j`` of the returned kernel sits at lag ``j - (n_taps // 2 - 1)``.
    A zero delay gives a unit impulse exactly.
    """
    half = n_taps / 2
    if frac == 0:
        return np.eye(1, n_taps, n_taps // 2 - 1)[0]
    lags = np.arange(n_taps) - (n_taps // 2 - 1)
    x = lags - frac
    win = np.zeros(n_taps)
    inside = np.abs(x) < half
    win[inside] = i0(_KAISER_BETA * np.sqrt(1 - (x[inside] / half) ** 2)) / i0(_KAISER_BETA)
    return np.sinc(x) * win


def delay_signal(x, delay, n_taps=FD_TAPS):
    """Delay `x` along its last axis by `delay` samples, keeping the length.

    Integer delays are exact index shifts; a fractional remainder goes
    through a windowed-sinc kernel.  Content pushed past either end is lost.
    """
    x = np.asarray(x, dtype=float)
    n = x.shape[-1]
    n_int = int(np.floor(delay))
    frac = delay - n_int
    if frac > 1 - 1e-12:
        n_int, frac = n_int + 1, 0.0
    if frac > 1e-12:
        h = fractional_delay_kernel(frac, n_taps)
        lead = n_taps // 2 - 1
        full = fftconvolve(x, h.reshape((1,) * (x.ndim - 1) + (-1,)), axes=-1)
        # full[t + lead] = sum_k h[k] x[t - (k - lead)]
        x = full[..., lead:lead + n]
    return shift_integer(x, n_int)


def shift_integer(x, n_shift):
    """Delay by an integer number of samples (negative advances)."""
    out = np.zeros_like(x)
    n = x.shape[-1]
    if n_shift >= n or -n_shift >= n:
        return out
    if n_shift >= 0:
        out[..., n_shift:] = x[..., :n - n_shift]
    else:
        out[..., :n + n_shift] = x[..., -n_shift:]
    return out


def odd_length(n):
    n = max(int(round(n)), 1)
    return n if n % 2 else n + 1


def centered_average(x, n, window=None, axis=-1):
    """Zero-phase moving average over an odd number of samples."""
    n = odd_length(n)
    w = np.ones(n) if window is None else np.asarray(window(n), dtype=float)
    w = w / w.sum()
    return convolve1d(np.asarray(x, dtype=float), w, axis=axis, mode="constant")


def cos2_fade_in(n):
    """``sin^2`` ramp of `n` samples rising from 0 to 1 (exclusive ends)."""
    if n <= 0:
        return np.zeros(0)
    return np.sin(np.pi * (np.arange(n) + 0.5) / (2 * n)) ** 2


def db(x, floor=1e-300):
    return 20 * np.log10(np.maximum(np.abs(x), floor))


def power_db(p, floor=1e-300):
    return 10 * np.log10(np.maximum(p, floor))
