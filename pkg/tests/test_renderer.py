import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.signal import fftconvolve

from aririnterp.core import Lattice, ListenerPose
from aririnterp.dsp import delay_signal
from aririnterp.filterbank import ThirdOctaveBank, band_frame_power
from aririnterp.oracle import ShoeboxRoom, image_sources, lattice_positions, simulate_arir
from aririnterp.renderer import (FineGrid, PartitionedConvolver, Trajectory, convolve_static,
                                 direct_toas, fine_interpolate, fine_lattice, stream_convolve)
from aririnterp.sh import rot_z, sh_rotation

FS = 44100.0
C = 343.0


def _rel_err(a, b):
    return np.abs(a - b).max() / np.abs(b).max()


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**31), st.sampled_from([64, 256, 1024]),
       st.integers(1, 5000), st.integers(1, 3000))
def test_ola_matches_direct_convolution(seed, frame, n_sig, n_filt):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(n_sig)
    h = rng.standard_normal((2, n_filt))
    y = convolve_static(x, h, frame)
    ref = np.array([fftconvolve(x, hh) for hh in h])
    assert y.shape == ref.shape
    assert _rel_err(y, ref) <= 1e-9


def test_impulse_input_returns_filter(rng):
    h = rng.standard_normal((4, 3000))
    x = np.zeros(2048)
    x[0] = 1.0
    y = convolve_static(x, h, 1024)
    assert np.allclose(y[:, :3000], h, atol=1e-12)
    assert np.allclose(y[:, 3000:], 0, atol=1e-12)


def test_filter_switch_settles_within_one_frame(rng):
    T = 256
    h1, h2 = rng.standard_normal((1, 700)), rng.standard_normal((1, 700))
    x = rng.standard_normal(5000)
    conv = PartitionedConvolver(T)
    H1, H2 = conv.partition(h1), conv.partition(h2)
    k0 = 8
    y = conv.run(x, lambda k: H1 if k < k0 else H2, 1, 700)
    y1 = fftconvolve(x, h1[0])
    y2 = fftconvolve(x, h2[0])
    assert np.allclose(y[0, :k0 * T], y1[:k0 * T], atol=1e-9)
    assert np.allclose(y[0, (k0 + 1) * T:], y2[(k0 + 1) * T:], atol=1e-9)


def test_fine_lattice_count():
    coarse = Lattice(lattice_positions((0.0, 0.0), (2, 2), 2.0, 1.2), 2.0)
    pos = fine_lattice(coarse, 0.25)
    assert len(pos) == 81
    assert np.allclose(pos[1] - pos[0], [0.25, 0, 0])
    assert np.allclose(pos[:, 2], 1.2)
    with pytest.raises(ValueError):
        fine_lattice(coarse, 0.3)


def test_neighbour_tdoa_bounded():
    coarse = Lattice(lattice_positions((0.0, 0.0), (3, 3), 2.0, 1.2), 2.0)
    pos = fine_lattice(coarse, 0.25)
    toas = direct_toas(pos, np.array([-3.0, 7.0, 2.5]), 0.0, C)
    n = int(round(np.sqrt(len(pos))))
    grid = toas.reshape(n, n)
    assert np.abs(np.diff(grid, axis=0)).max() <= 0.25 / C + 1e-15
    assert np.abs(np.diff(grid, axis=1)).max() <= 0.25 / C + 1e-15


def test_max_direct_tdoa_value():
    # source far along the axis joining two neighbours
    toas = direct_toas(np.array([[0.0, 0, 0], [0.25, 0, 0]]), np.array([-50.0, 0, 0]), 0, C)
    assert (toas[1] - toas[0]) * 1e3 == pytest.approx(0.729, abs=5e-4)


def _impulse_grid(src, r=0.25, n=4096, order=0):
    pos = np.array([[0, 0, 1.0], [r, 0, 1], [0, r, 1], [r, r, 1]])
    toas = np.linalg.norm(pos - src, axis=1) / C
    ch = np.zeros((4, (order + 1) ** 2, n))
    for k in range(4):
        imp = np.zeros(n)
        imp[0] = 1.0
        ch[k, 0] = delay_signal(imp, toas[k] * FS)
    return FineGrid(ch, pos, r, FS, toas)


def _spectrum_db(x, n_fft=1 << 16):
    return 20 * np.log10(np.abs(np.fft.rfft(x, n_fft)) + 1e-12), np.fft.rfftfreq(n_fft, 1 / FS)


def test_unaligned_comb_notch_and_aligned_removal():
    fg = _impulse_grid(np.array([-10.0, 0.0, 1.0]))
    dt = fg.toas[1] - fg.toas[0]
    assert dt * 1e3 == pytest.approx(0.7288, abs=1e-3)
    unaligned = 0.5 * fg.channels[0, 0] + 0.5 * fg.channels[1, 0]
    H, f = _spectrum_db(unaligned)
    band = (f > 100) & (f < 2000)
    notch = f[band][np.argmin(H[band])]
    assert notch == pytest.approx(686, abs=5)
    for correct in (False, True):
        a = fine_interpolate(fg, ListenerPose([0.125, 0, 1]), True, correct).channels[0]
        H, f = _spectrum_db(a)
        band = (f > 100) & (f < 10000)
        assert H[band].min() >= -1.0


def test_fine_node_reproduced(rng):
    fg = _impulse_grid(np.array([-4.0, 3.0, 1.5]), order=1)
    fg.channels[:, :, :] += 0.01 * rng.standard_normal(fg.channels.shape)
    for k in range(4):
        a = fine_interpolate(fg, ListenerPose(fg.positions[k])).channels
        assert _rel_err(a, fg.channels[k]) <= 1e-6


def test_head_rotation_applied_last():
    fg = _impulse_grid(np.array([-4.0, 3.0, 1.5]), order=1)
    fg.channels[:, 1:] = fg.channels[:, :1] * np.array([0.3, 0.1, -0.5])[:, None]
    pose = ListenerPose([0.1, 0.05, 1.0])
    a = fine_interpolate(fg, pose).channels
    b = fine_interpolate(fg, ListenerPose(pose.position, (0.7, 0, 0))).channels
    assert np.allclose(b, sh_rotation(rot_z(-0.7), 1) @ a, atol=1e-12)


def test_save_load_memmap(tmp_path, rng):
    fg = _impulse_grid(np.array([-4.0, 3.0, 1.5]), order=1)
    fg.save(tmp_path)
    back = FineGrid.load(tmp_path)
    assert isinstance(back.channels, np.memmap)
    assert np.array_equal(back.channels, fg.channels)
    assert np.array_equal(back.toas, fg.toas)
    pose = ListenerPose([0.1, 0.2, 1.0])
    assert np.array_equal(fine_interpolate(back, pose).channels,
                          fine_interpolate(fg, pose).channels)


def test_trajectory_interpolation_and_hold():
    recs = [{"t_seconds": 1.0, "x": 1, "y": 0, "z": 1, "yaw": 90},
            {"t_seconds": 0.0, "x": 0, "y": 0, "z": 1, "yaw": 0}]
    tr = Trajectory.from_records(recs)
    assert np.allclose(tr.pose_at(-1).position, [0, 0, 1])
    assert np.allclose(tr.pose_at(5).position, [1, 0, 1])
    mid = tr.pose_at(0.5)
    assert np.allclose(mid.position, [0.5, 0, 1])
    assert mid.yaw_pitch_roll[0] == pytest.approx(np.pi / 4)


def test_trajectory_validation():
    with pytest.raises(ValueError):
        Trajectory([1.0, 0.0], [ListenerPose([0, 0, 0])] * 2)
    with pytest.raises(ValueError):
        Trajectory([], [])


def test_stream_static_pose_equals_offline(rng):
    fg = _impulse_grid(np.array([-4.0, 3.0, 1.5]), order=1, n=3000)
    pose = ListenerPose([0.1, 0.2, 1.0])
    x = rng.standard_normal(6000)
    y = stream_convolve(x, Trajectory([0.0], [pose]), fg, frame=512)
    d = fine_interpolate(fg, pose).channels
    ref = np.array([fftconvolve(x, dd) for dd in d])
    assert _rel_err(y, ref) <= 1e-9


def test_stream_impulse_input_equals_interpolated_arir():
    fg = _impulse_grid(np.array([-4.0, 3.0, 1.5]), order=1, n=3000)
    pose = ListenerPose([0.2, 0.05, 1.0])
    x = np.zeros(1024)
    x[0] = 1.0
    y = stream_convolve(x, Trajectory([0.0], [pose]), fg, frame=1024)
    assert np.allclose(y[:, :3000], fine_interpolate(fg, pose).channels, atol=1e-12)


@pytest.fixture(scope="module")
def oracle_fine():
    room = ShoeboxRoom([14.0, 10.0, 4.1], 0.3)
    src = np.array([4.3, 6.2, 2.7])
    ims = image_sources(room, src, 10)
    x0 = np.array([6.0, 3.0, 1.2])
    r = 0.25
    pos = np.array([x0, x0 + [r, 0, 0], x0 + [0, r, 0], x0 + [r, r, 0]])
    ch = np.array([simulate_arir(room, src, p, 1, FS, 8820, images=ims, c=C).channels
                   for p in pos])
    return FineGrid(ch, pos, r, FS, direct_toas(pos, src, 0.0, C)), ch


def test_spectral_deviation_at_cell_midpoint(oracle_fine):
    fg, ch = oracle_fine
    mid = ListenerPose(fg.positions[0] + [0, 0.125, 0])
    bank = ThirdOctaveBank(FS)
    split = int(0.1 * FS)

    def bands(x):
        p, _ = band_frame_power(x[:split], bank)
        return p.sum(axis=-1)

    ref = 10 * np.log10(0.5 * (bands(ch[0, 0]) + bands(ch[2, 0])))
    out = fine_interpolate(fg, mid).channels[0]
    assert np.max(np.abs(10 * np.log10(bands(out)) - ref)) <= 3.0

    # direct-sound window: aligned stays flat, unaligned combs at 1/(2 dT)
    t0 = int(fg.toas.min() * FS) - 16
    win = slice(t0, t0 + 96)
    n_fft = 1 << 15
    f = np.fft.rfftfreq(n_fft, 1 / FS)

    def power_spec(x):
        return np.abs(np.fft.rfft(x[win], n_fft)) ** 2

    avg = 10 * np.log10(0.5 * (power_spec(ch[0, 0]) + power_spec(ch[2, 0])))
    dev_aligned = 10 * np.log10(power_spec(out)) - avg
    dev_plain = 10 * np.log10(power_spec(0.5 * (ch[0, 0] + ch[2, 0]))) - avg
    band = (f > 100) & (f < 10000)
    assert np.all(np.abs(dev_aligned[band]) <= 3.0)
    f_notch = 1 / (2 * abs(fg.toas[2] - fg.toas[0]))
    near = np.abs(f - f_notch) < 50
    assert dev_plain[near].min() < -6.0
