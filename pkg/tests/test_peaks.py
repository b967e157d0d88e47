import numpy as np
import pytest

from aririnterp.core import Arir
from aririnterp.metrics import angle_deg
from aririnterp.peaks import PeakDetectConfig, analyze_peaks, direct_peak
from aririnterp.sh import sh_eval

FS = 44100.0


def pulses(events, n=8000, order=1):
    """ARIR with impulses given as (sample, gain, direction)."""
    ch = np.zeros(((order + 1) ** 2, n))
    for k, g, d in events:
        d = np.asarray(d, dtype=float)
        ch[:, k] += g * sh_eval(d / np.linalg.norm(d), order)
    return Arir(ch, FS)


def test_single_impulse_gives_one_peak():
    _, _, peaks = analyze_peaks(pulses([(500, 1.0, (1, 0, 0))]))
    assert len(peaks) == 1
    assert peaks[0].sample == 500
    assert abs(peaks[0].toa * FS - 500) < 0.5
    assert angle_deg(peaks[0].doa, (1, 0, 0)) < 0.5


def test_two_pulses_five_ms_apart():
    a = pulses([(500, 1.0, (1, 0, 0)), (500 + int(0.005 * FS), 1.0, (0, 1, 0))])
    _, _, peaks = analyze_peaks(a)
    assert len(peaks) == 2
    assert angle_deg(peaks[1].doa, (0, 1, 0)) < 2.0


def test_floor_rejects_weak_pulse():
    a = pulses([(500, 1.0, (1, 0, 0)), (900, 10 ** (-50 / 20), (0, 1, 0))])
    assert len(analyze_peaks(a)[2]) == 1


def test_early_window_limits_peaks():
    a = pulses([(500, 1.0, (1, 0, 0)), (500 + int(0.08 * FS), 0.5, (0, 1, 0))])
    assert len(analyze_peaks(a)[2]) == 1
    cfg = PeakDetectConfig(early_window=0.1)
    assert len(analyze_peaks(a, cfg)[2]) == 2


def test_ordering_spacing_and_gain_invariance(rng):
    events = [(400 + 90 * i, float(rng.uniform(0.2, 1.0)), rng.standard_normal(3)) for i in range(12)]
    events[0] = (400, 2.0, (1, 0, 0))
    a = pulses(events)
    _, _, peaks = analyze_peaks(a)
    mags = [p.magnitude for p in peaks]
    assert mags == sorted(mags, reverse=True)
    toas = np.sort([p.toa for p in peaks])
    assert np.all(np.diff(toas) > 0)
    assert np.min(np.diff(toas)) >= 0.5e-3 - 1 / FS
    _, _, scaled = analyze_peaks(a.with_channels(3.0 * a.channels))
    assert [p.sample for p in scaled] == [p.sample for p in peaks]
    for p, q in zip(peaks, scaled):
        assert p.toa == pytest.approx(q.toa, abs=1e-12)
        np.testing.assert_allclose(p.doa, q.doa, atol=1e-9)
    assert direct_peak(peaks).sample == 400


def test_direct_sound_is_earliest_strong_peak():
    a = pulses([(300, 0.2, (1, 0, 0)), (600, 1.0, (0, 1, 0)), (700, 0.8, (0, 0, 1))])
    _, _, peaks = analyze_peaks(a)
    # the weak pre-echo is more than 6 dB down, so it is not the direct sound
    assert direct_peak(peaks).sample == 600
    assert all(p.sample != 300 for p in peaks)


def test_zero_arir_has_no_peaks():
    assert analyze_peaks(Arir(np.zeros((4, 100)), FS))[2] == []


def test_config_validation():
    with pytest.raises(ValueError):
        PeakDetectConfig(prominence_db=0)
