import numpy as np
import pytest

from aririnterp.asdm import (AsdmConfig, asdm_upmix, decorrelate_late,
                             decorrelation_coefficients, encode_along_doa,
                             spectral_envelope_correction)
from aririnterp.core import Arir
from aririnterp.filterbank import ThirdOctaveBank, band_frame_power
from aririnterp.sh import acn_order_degree, order_slices, sh_eval

FS = 44100.0


@pytest.fixture(scope="module")
def bank():
    return ThirdOctaveBank(FS)


def static_source(rng, direction=(0.2, 0.5, 0.84), n=8820):
    d = np.asarray(direction) / np.linalg.norm(direction)
    w = rng.standard_normal(n) * np.exp(-np.arange(n) / 2000)
    return Arir(sh_eval(d, 1)[:, None] * w, FS), d, w


def band_energy(x, bank):
    return (bank.analyze(x) ** 2).sum(axis=-1)


def test_static_source_equals_direct_encoding(rng):
    a, d, w = static_source(rng)
    cfg = AsdmConfig(correct_spectrum=False, decorrelate=False)
    out = asdm_upmix(a, cfg)
    assert out.order == 5
    np.testing.assert_allclose(out.channels, sh_eval(d, 5)[:, None] * w, atol=1e-9)
    np.testing.assert_array_equal(out.channels[0], a.omni)


def test_static_source_correction_is_noop(rng, bank):
    a, d, w = static_source(rng)
    enc = Arir(encode_along_doa(a, 5), FS)
    corr = spectral_envelope_correction(enc, a.omni, bank)
    ratio = np.sum(corr.channels ** 2, axis=1) / np.sum(enc.channels ** 2, axis=1)
    assert np.max(np.abs(10 * np.log10(ratio))) < 0.1


def test_alternating_direction_correction(rng, bank):
    n = 22050
    w = rng.standard_normal(n)
    dirs = np.where((np.arange(n) // 10)[:, None] % 2 == 0, [1.0, 0, 0], [-1.0, 0, 0])
    first = np.vstack([w, np.sqrt(3) * (dirs[:, [1, 2, 0]].T * w)])
    a = Arir(first, FS)
    out = asdm_upmix(a, AsdmConfig(decorrelate=False), bank)
    e_in = band_energy(w, bank)
    e_out = band_energy(out.omni, bank)
    assert np.max(np.abs(10 * np.log10(e_out / e_in))) < 1.0


def test_whitened_tail_matches_diffuse_target(rng, bank):
    n = 22050
    w = rng.standard_normal(n)
    d = rng.standard_normal((n, 3))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    a = Arir(np.vstack([w, np.sqrt(3) * (d[:, [1, 2, 0]].T * w)]), FS)
    out = asdm_upmix(a, AsdmConfig(decorrelate=False, target_order=3), bank)
    ref = band_energy(w, bank)
    for k, sl in enumerate(order_slices(3)):
        e = band_energy(out.channels[sl], bank).sum(axis=1)
        assert np.max(np.abs(10 * np.log10(e / ((2 * k + 1) * ref)))) < 1.0


def test_doubled_first_order_gets_half_gain(rng, bank):
    a, d, w = static_source(rng)
    enc = Arir(encode_along_doa(a, 2), FS)
    doubled = enc.channels.copy()
    doubled[1:4] *= 2
    corr = spectral_envelope_correction(enc.with_channels(doubled), a.omni, bank)
    np.testing.assert_allclose(corr.channels[1:4], enc.channels[1:4], rtol=0, atol=1e-3 * np.abs(enc.channels).max())


def test_decorrelation_coefficients():
    q, c = decorrelation_coefficients(0, np.radians(50), 5)
    assert c[q == 0] == 1.0 and np.all(c[q != 0] == 0)
    for m in range(-5, 6):
        _, c = decorrelation_coefficients(m, np.radians(50), 5)
        assert abs(10 * np.log10(np.sum(c ** 2))) < 0.1
    q, c = decorrelation_coefficients(3, np.radians(50), 5, one_sided=True)
    assert q[0] == 0 and len(q) == 6


def test_decorrelation_preserves_energy_and_early_part(rng):
    n = 22050
    chans = rng.standard_normal((16, n))
    a = Arir(chans, FS)
    cfg = AsdmConfig()
    out = decorrelate_late(a, cfg)
    start = int(round(cfg.decorrelation_start * FS))
    np.testing.assert_array_equal(out.channels[:, :start], chans[:, :start])
    _, m = acn_order_degree(3)
    np.testing.assert_array_equal(out.channels[m == 0], chans[m == 0])
    tail = slice(start + int(0.03 * FS), n - int(0.03 * FS))
    ratio = np.sum(out.channels[:, tail] ** 2, 1) / np.sum(chans[:, tail] ** 2, 1)
    assert np.max(np.abs(10 * np.log10(ratio))) < 1.0
    assert not np.allclose(out.channels[1, tail], chans[1, tail])


def test_zero_tail_unchanged():
    chans = np.zeros((9, 6000))
    chans[:, 10] = 1.0
    a = Arir(chans, FS)
    np.testing.assert_array_equal(decorrelate_late(a).channels, chans)


def test_full_chain_preserves_omni_energy(rng):
    n = 13230
    w = rng.standard_normal(n) * np.exp(-np.arange(n) / 3000)
    d = rng.standard_normal((n, 3))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    a = Arir(np.vstack([w, np.sqrt(3) * (d[:, [1, 2, 0]].T * w)]), FS)
    out = asdm_upmix(a)
    assert abs(10 * np.log10(np.sum(out.omni ** 2) / np.sum(w ** 2))) < 1.0


def test_config_validation():
    with pytest.raises(ValueError):
        AsdmConfig(target_order=0)
    with pytest.raises(ValueError):
        AsdmConfig(tau=0)
    with pytest.raises(ValueError):
        AsdmConfig(phi_hat=4.0)
    with pytest.raises(ValueError):
        asdm_upmix(Arir(np.zeros((9, 100)), FS))
