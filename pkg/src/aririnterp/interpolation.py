"""Variable-perspective ARIR synthesis from a triplet of grid perspectives.

The early part of each ARIR is split into segments around matched peaks
plus a residual.  Peak segments are extrapolated towards their localized
sound event, aligned and combined with an energy correction; residuals are
extrapolated sample-wise, combined and spectrally corrected per
third-octave band.  The sum is rotated to the head orientation.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np

from .core import Arir, grid_weights
from .doa import doa_trajectory
from .dsp import cos2_fade_in
from .extrapolation import Segment, extrapolate_residual, extrapolate_segment
from .filterbank import ThirdOctaveBank, band_frame_power, envelope_correction
from .localization import LocalizationError, SoundEvent, localize_global
from .matching import MatchConfig, match_peaks
from .peaks import PeakDetectConfig, analyze_peaks, direct_peak
from .sh import sh_rotation


@dataclass
class InterpConfig:
    """Segment, alignment and correction settings.

    Attributes
    ----------
    pre_samples : int
        Segment start before the peak TOA.
    max_segment : float
        Segment length cap in seconds.
    fade : int
        Segment edge fade length in samples.
    xcorr_range : int
        Largest alignment lag in samples.
    residual_limit : float
        Flight time (s) up to which residuals are extrapolated.
    shift_window : int
        Sliding-window length of the residual shift segmentation.
    fractional_segments : bool
        Apply sub-sample shifts to peak segments.
    correction_avg, correction_hop : float
        Averaging length and hop (s) of the band-energy correction.
    max_correction_db : float or None
        Upper limit of the band-energy correction gain.
    """

    pre_samples: int = 16
    max_segment: float = 0.003
    fade: int = 16
    xcorr_range: int = 8
    residual_limit: float = 0.100
    shift_window: int = 16
    fractional_segments: bool = False
    correction_avg: float = 0.010
    correction_hop: float = 0.005
    max_correction_db: float = 20.0

    def __post_init__(self):
        if self.max_segment * 44100.0 <= 0 or self.fade < 0 or self.pre_samples < 0:
            raise ValueError("invalid segment settings")


# ----------------------------------------------------------------------------
# segment cutting


def _segment_window(length, fade):
    w = np.ones(length)
    f = min(fade, length // 2)
    if f > 0:
        ramp = cos2_fade_in(f)
        w[:f] = ramp
        w[length - f:] = ramp[::-1]
    return w, f


def segment_bounds(toas, n_samples, sample_rate, pre=16, max_segment=0.003):
    """``(start, length)`` per TOA (seconds), returned in input order.

    Each segment starts `pre` samples before its TOA and ends at the next
    segment start or after `max_segment`, whichever comes first.
    """
    toas = np.asarray(toas, dtype=float)
    starts = np.clip(np.round(toas * sample_rate).astype(int) - pre, 0, n_samples)
    order = np.argsort(starts, kind="stable")
    cap = int(np.floor(max_segment * sample_rate))
    out = [None] * len(toas)
    for k, j in enumerate(order):
        s = int(starts[j])
        stop = min(s + cap, n_samples)
        if k + 1 < len(order):
            nxt = int(starts[order[k + 1]])
            if nxt - s < 2 * pre:
                warnings.warn("matched peaks closer than two segment lead-ins; "
                              "segments truncated", RuntimeWarning, stacklevel=2)
            stop = min(stop, nxt)
        out[j] = (s, max(stop - s, 0))
    return out


def cut_peak_segments(arir, matched_toas, pre=16, max_segment=0.003, fade=16,
                      lengths=None):
    """Cut faded segments around matched peaks and return the residual.

    Parameters
    ----------
    arir : Arir
    matched_toas : sequence of float
        Peak TOAs in seconds.
    lengths : sequence of int, optional
        Per-peak lengths overriding (never exceeding) the computed ones.

    Returns
    -------
    segments : list of Segment
        In the order of `matched_toas`.
    residual : Arir
        ``arir - sum(segments)``.
    """
    chans = arir.channels
    bounds = segment_bounds(matched_toas, chans.shape[1], arir.sample_rate, pre,
                            max_segment)
    residual = chans.copy()
    segs = []
    for k, (s, length) in enumerate(bounds):
        if lengths is not None:
            length = min(length, int(lengths[k]))
        w, f = _segment_window(length, fade)
        samples = chans[:, s:s + length] * w[None, :]
        residual[:, s:s + length] -= samples
        segs.append(Segment(samples, s, f, f))
    return segs, arir.with_channels(residual)


# ----------------------------------------------------------------------------
# peak and residual interpolation


def _place(buf, samples, start):
    n = buf.shape[1]
    a, b = max(start, 0), min(start + samples.shape[1], n)
    if b > a:
        buf[:, a:b] += samples[:, a - start:b - start]


def _xcorr_lag(ref, seg, max_lag):
    """Lag (samples) to add to `seg.start` maximizing the omni correlation."""
    best, best_lag = -np.inf, 0
    r, s = ref.omni, seg.omni
    for lag in range(-max_lag, max_lag + 1):
        off = seg.start + lag - ref.start
        a, b = max(0, off), min(len(r), off + len(s))
        val = float(r[a:b] @ s[a - off:b - off]) if b > a else 0.0
        if val > best + 1e-300 or (val == best and abs(lag) < abs(best_lag)):
            best, best_lag = val, lag
    return best_lag


def interpolate_matched_peaks(segments, weights, n_samples, xcorr_range=8):
    """Weighted, aligned and energy-corrected sum of extrapolated segments.

    Parameters
    ----------
    segments : list over matches of lists of 3 Segment
        Extrapolated segments of each match, in triplet order.
    weights : (3,) array_like
    n_samples : int

    Returns
    -------
    out : (C, n_samples) ndarray
    info : list of dict
        Alignment lags and energy correction ``p_cor`` per match.
    """
    weights = np.asarray(weights, dtype=float)
    ref = int(np.argmax(weights))
    n_ch = segments[0][0].samples.shape[0] if segments else 1
    out = np.zeros((n_ch, n_samples))
    info = []
    for segs in segments:
        lags = [0] * len(segs)
        placed = []
        for i, seg in enumerate(segs):
            if i != ref and weights[i] > 0:
                lags[i] = _xcorr_lag(segs[ref], seg, xcorr_range)
            placed.append(Segment(seg.samples, seg.start + lags[i], seg.fade_in, seg.fade_out))
        live = [i for i in range(len(segs)) if weights[i] > 0]
        lo = min(placed[i].start for i in live)
        hi = max(placed[i].stop for i in live)
        mix = np.zeros((n_ch, hi - lo))
        for i in live:
            mix[:, placed[i].start - lo:placed[i].stop - lo] += weights[i] * placed[i].samples
        target = sum(weights[i] * float(placed[i].omni @ placed[i].omni) for i in live)
        actual = float(mix[0] @ mix[0])
        if actual <= 1e-15 * max(target, actual, 1e-300):
            p_cor = 1.0
        else:
            p_cor = target / actual
        _place(out, np.sqrt(p_cor) * mix, lo)
        info.append({"lags": lags, "p_cor": p_cor})
    return out, info


def residual_reference_power(raw_omni, bank, avg=0.010, hop=0.005):
    """Short-time band power ``(B, F)`` of a raw residual omni channel."""
    return band_frame_power(raw_omni, bank, avg, hop)[0]


def interpolate_residuals(extrapolated, raw_power, weights, bank, cfg=None):
    """Weighted sum of extrapolated residuals with band-energy correction.

    Parameters
    ----------
    extrapolated : list of (C, T) ndarray
    raw_power : list of (B, F) ndarray
        Reference band powers of the raw residual omni channels.
    weights : (3,) array_like
    bank : ThirdOctaveBank

    Returns
    -------
    (C, T) ndarray
        Per order ``n`` the band energy follows ``(2n+1)`` times the
        weighted reference power; silent reference band-frames give silence.
    """
    cfg = cfg or InterpConfig()
    weights = np.asarray(weights, dtype=float)
    live = [i for i in range(len(weights)) if weights[i] > 0]
    mix = sum(weights[i] * extrapolated[i] for i in live)
    p_ref = sum(weights[i] * raw_power[i] for i in live)
    order = int(round(np.sqrt(mix.shape[0]))) - 1
    target = np.array([(2 * n + 1) * p_ref for n in range(order + 1)])
    out, _ = envelope_correction(mix, target, bank, cfg.correction_avg,
                                 cfg.correction_hop, on_zero=0.0,
                                 max_gain_db=cfg.max_correction_db)
    return out


# ----------------------------------------------------------------------------
# grid preparation and synthesis


@dataclass
class TripletData:
    """Matching result and split ARIRs of one perspective triplet."""

    indices: tuple
    matches: list
    segments: list          # per perspective: list of Segment per match
    residuals: list         # per perspective: Arir
    residual_doas: list     # per perspective: DoaTrajectory
    residual_power: list    # per perspective: (B, F)


@dataclass
class PreparedGrid:
    """Grid with per-perspective analysis and a cache of triplet matchings."""

    grid: object
    peaks: list
    direct_peaks: list
    source: SoundEvent
    system_delay: float
    interp: InterpConfig = field(default_factory=InterpConfig)
    match: MatchConfig = field(default_factory=MatchConfig)
    bank: ThirdOctaveBank = None
    doa_band: tuple = (200.0, 3000.0)
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.bank is None:
            self.bank = ThirdOctaveBank(self.grid.sample_rate)

    @property
    def speed_of_sound(self):
        return self.grid.speed_of_sound

    def triplet(self, indices):
        key = tuple(int(i) for i in indices)
        if key not in self._cache:
            self._cache[key] = self._prepare_triplet(key)
        return self._cache[key]

    def _prepare_triplet(self, idx):
        g = self.grid
        pos = g.positions[list(idx)]
        matches = match_peaks([self.peaks[i] for i in idx], pos,
                              [self.direct_peaks[i] for i in idx], self.source,
                              self.system_delay, g.sample_rate, self.match,
                              g.speed_of_sound)
        cfg = self.interp
        toas = np.array([m.toas for m in matches])          # (M, 3)
        fs = g.sample_rate
        bounds = [segment_bounds(toas[:, k], g.n_samples, fs, cfg.pre_samples,
                                 cfg.max_segment) for k in range(3)]
        lengths = np.min([[b[1] for b in bk] for bk in bounds], axis=0)
        segments, residuals, doas, power = [], [], [], []
        for k, i in enumerate(idx):
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RuntimeWarning)
                segs, res = cut_peak_segments(g.arirs[i], toas[:, k], cfg.pre_samples,
                                              cfg.max_segment, cfg.fade, lengths)
            segments.append(segs)
            residuals.append(res)
            doas.append(doa_trajectory(res, self.doa_band))
            power.append(residual_reference_power(res.omni, self.bank,
                                                  cfg.correction_avg, cfg.correction_hop))
        return TripletData(idx, matches, segments, residuals, doas, power)


def prepare_grid(grid, interp=None, peaks=None, match=None, use_known_source=False):
    """Analyze every perspective and localize the direct source.

    Parameters
    ----------
    grid : ArirGrid
    use_known_source : bool
        Use ``grid.source_position`` instead of localizing the direct sound.
    """
    peak_cfg = peaks or PeakDetectConfig()
    all_peaks, direct = [], []
    for i, a in enumerate(grid.arirs):
        _, _, pk = analyze_peaks(a, peak_cfg, perspective=i)
        ds = direct_peak(pk)
        if ds is None:
            raise LocalizationError("no-direct-sound", f"no peak found in perspective {i}")
        all_peaks.append(pk)
        direct.append(ds)
    c = grid.speed_of_sound
    toas = np.array([p.toa for p in direct])
    doas = np.array([p.doa for p in direct])
    pos = grid.positions
    if use_known_source or len(grid) < 4:
        if grid.source_position is None:
            raise LocalizationError("rank-deficient",
                                    "fewer than four perspectives and no known source")
        src = np.asarray(grid.source_position, dtype=float)
        from .localization import angular_error
        source = SoundEvent(src, float(angular_error(src, doas, pos)), 0.0, "direct")
        delay = float(np.mean(toas - np.linalg.norm(pos - src, axis=1) / c))
    else:
        source, delay = localize_global(toas, doas, pos, c)
    if grid.system_delay is not None and use_known_source:
        delay = float(grid.system_delay)
    return PreparedGrid(grid, all_peaks, direct, source, delay,
                        interp or InterpConfig(), match or MatchConfig(),
                        doa_band=tuple(peak_cfg.doa_band))


def synthesize_perspective(prepared, pose, return_parts=False):
    """ARIR at a listener pose from the enclosing perspective triplet.

    Parameters
    ----------
    prepared : PreparedGrid
    pose : ListenerPose
    return_parts : bool
        Also return the peak and residual parts (before head rotation) and
        the triplet data.
    """
    g = prepared.grid
    cfg = prepared.interp
    c = g.speed_of_sound
    fs = g.sample_rate
    x_d = pose.position
    idx = g.select_triplet(x_d)
    pos = g.positions[idx]
    w = grid_weights(x_d, pos, g.spacing)
    tri = prepared.triplet(idx)
    n = g.n_samples

    ext = []
    for m, match in enumerate(tri.matches):
        event = prepared.source.position if m == 0 else match.event.position
        ext.append([extrapolate_segment(tri.segments[k][m], pos[k], event, x_d, fs, c,
                                        cfg.fractional_segments) for k in range(3)])
    d_p, _ = interpolate_matched_peaks(ext, w, n, cfg.xcorr_range)

    res_ext = [None] * 3
    for k in range(3):
        if w[k] > 0:
            res_ext[k], _ = extrapolate_residual(tri.residuals[k], tri.residual_doas[k],
                                                 pos[k], x_d, cfg.residual_limit,
                                                 cfg.shift_window, c, prepared.system_delay)
    d_r = interpolate_residuals(res_ext, tri.residual_power, w, prepared.bank, cfg)

    d = d_p + d_r
    R = pose.scene_rotation()
    if not np.allclose(R, np.eye(3), atol=1e-12):
        d = sh_rotation(R, g.order) @ d
    out = Arir(d, fs, x_d, delay_compensated=False)
    if return_parts:
        return out, {"peaks": d_p, "residual": d_r, "weights": w, "triplet": tri}
    return out
