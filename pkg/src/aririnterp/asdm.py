"""Ambisonic spatial decomposition: first-order to higher-order upmix."""

from dataclasses import dataclass

import numpy as np
from scipy.special import jv

from .core import Arir
from .doa import doa_trajectory
from .dsp import cos2_fade_in, shift_integer
from .filterbank import ThirdOctaveBank, band_frame_power, envelope_correction
from .sh import acn_order_degree, sh_eval


@dataclass
class AsdmConfig:
    """Upmix settings.

    Attributes
    ----------
    target_order : int
        Output SH order.
    decorrelation_start : float
        Time (s) after which the tail is decorrelated.
    tau : float
        Delay step (s) of the phase-modulation sum.
    phi_hat : float
        Modulation depth in radians.
    q_max : int
        Largest delay index.
    one_sided : bool
        Sum only ``q = 0..q_max`` instead of ``-q_max..q_max``.  The one-sided
        sum loses energy for ``|m| >= 2``.
    crossfade : float
        Length (s) of the fade into the decorrelated tail.
    correct_spectrum, decorrelate : bool
        Enable the two post-processing stages.
    doa_band : (float, float)
        Pass band (Hz) of the DOA estimator.
    """

    target_order: int = 5
    decorrelation_start: float = 0.100
    tau: float = 0.005
    phi_hat: float = np.deg2rad(50.0)
    q_max: int = 5
    one_sided: bool = False
    crossfade: float = 0.005
    correct_spectrum: bool = True
    decorrelate: bool = True
    doa_band: tuple = (200.0, 3000.0)

    def __post_init__(self):
        self.doa_band = tuple(float(f) for f in self.doa_band)
        if self.target_order < 1:
            raise ValueError("target_order must be >= 1")
        if self.tau <= 0:
            raise ValueError("tau must be positive")
        if not 0 < self.phi_hat < np.pi:
            raise ValueError("phi_hat must lie in (0, pi)")


def encode_along_doa(arir, order, doas=None):
    """Re-encode the omni channel along the per-sample DOA."""
    if doas is None:
        doas = doa_trajectory(arir)
    Y = sh_eval(doas.directions, order)          # (T, C)
    return Y.T * arir.omni[None, :]


def spectral_envelope_correction(enhanced, reference_omni, bank=None,
                                 avg=0.01, hop=0.005):
    """Give each order the diffuse-field band energy ``(2n+1) |ref|^2``.

    Band-frames with no reference energy keep unit gain.
    """
    if bank is None:
        bank = ThirdOctaveBank(enhanced.sample_rate)
    p_ref, _ = band_frame_power(reference_omni, bank, avg, hop)
    order = enhanced.order
    target = np.array([(2 * n + 1) * p_ref for n in range(order + 1)])
    out, _ = envelope_correction(enhanced.channels, target, bank, avg, hop,
                                 on_zero=1.0)
    return enhanced.with_channels(out)


def decorrelation_coefficients(m, phi_hat, q_max, one_sided=False):
    """Delay indices and weights of the phase-modulation sum for degree `m`."""
    q = np.arange(0 if one_sided else -q_max, q_max + 1)
    aq = np.abs(q)
    c = jv(aq, m * phi_hat) * (np.cos(np.pi * aq / 2) - np.sign(m) * np.sin(np.pi * aq / 2))
    return q, c


def decorrelate_late(arir, cfg=None):
    """Decorrelate the late part of the ``m != 0`` channels.

    The output before ``cfg.decorrelation_start`` is untouched; a cos^2 fade
    of ``cfg.crossfade`` seconds leads into the modulated tail.
    """
    cfg = cfg or AsdmConfig()
    fs = arir.sample_rate
    n = arir.n_samples
    start = int(round(cfg.decorrelation_start * fs))
    if start >= n:
        return arir
    fade = np.ones(n)
    fade[:start] = 0.0
    n_fade = max(int(round(cfg.crossfade * fs)), 1)
    ramp = cos2_fade_in(n_fade)[: n - start]
    fade[start:start + len(ramp)] = ramp
    step = int(round(cfg.tau * fs))
    _, degrees = acn_order_degree(arir.order)
    out = arir.channels.copy()
    for ch, m in enumerate(degrees):
        if m == 0:
            continue
        q, c = decorrelation_coefficients(m, cfg.phi_hat, cfg.q_max, cfg.one_sided)
        h = arir.channels[ch]
        y = np.zeros(n)
        for qq, cc in zip(q, c):
            y += cc * shift_integer(h, int(qq) * step)
        out[ch, start:] = (1 - fade[start:]) * h[start:] + fade[start:] * y[start:]
    return arir.with_channels(out)


def asdm_upmix(arir, cfg=None, bank=None):
    """Upmix a first-order ARIR to ``cfg.target_order``.

    The omni channel is re-encoded along the pseudo-intensity DOA, the
    short-time band energies of every order are matched to the diffuse-field
    expectation and the late tail is decorrelated.
    """
    cfg = cfg or AsdmConfig()
    if arir.order != 1:
        raise ValueError("ASDM upmix expects a first-order ARIR")
    doas = doa_trajectory(arir, tuple(cfg.doa_band))
    enc = Arir(encode_along_doa(arir, cfg.target_order, doas), arir.sample_rate,
               arir.position, arir.delay_compensated)
    if cfg.correct_spectrum:
        enc = spectral_envelope_correction(enc, arir.omni, bank)
    if cfg.decorrelate:
        enc = decorrelate_late(enc, cfg)
    return enc
