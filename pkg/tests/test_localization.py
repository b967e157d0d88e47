import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aririnterp.core import Arir
from aririnterp.localization import (LocalizationError, angular_error, localize_global,
                                     localize_triplet, ls_cost_2d, ls_cost_3d,
                                     orientation_correction, sx_candidates)
from aririnterp.metrics import angle_deg
from aririnterp.oracle import lattice_positions
from aririnterp.peaks import analyze_peaks, direct_peak
from aririnterp.sh import rot_z, rotate_channels, sh_eval

C = 343.0
GRID = lattice_positions((0.0, 0.0), (3, 3), 2.0, 1.2)
TRIPLET = GRID[[0, 1, 3]]


def observations(src, positions, delay=0.0):
    vec = np.asarray(src) - positions
    D = np.linalg.norm(vec, axis=1)
    return D / C + delay, vec / D[:, None]


coord = st.floats(-6.0, 10.0)
height = st.floats(0.5, 4.0)


@settings(max_examples=60, deadline=None)
@given(coord, coord, height, st.floats(-1e-3, 5e-3))
def test_global_exact_tdoas(x, y, dz, delay):
    src = np.array([x, y, 1.2 + dz])
    toas, doas = observations(src, GRID, delay)
    ev, d = localize_global(toas, doas, GRID, C)
    assert np.linalg.norm(ev.position - src) < 1e-2
    assert abs(d - delay) < 1e-6


def test_global_resolves_height_sign_with_doas():
    src = np.array([1.3, 5.1, 0.2])
    toas, doas = observations(src, GRID)
    ev, _ = localize_global(toas, doas, GRID, C)
    assert ev.position[2] < 1.2
    assert np.linalg.norm(ev.position - src) < 1e-2


def test_global_errors():
    toas, doas = observations([1, 7, 2], GRID)
    with pytest.raises(LocalizationError) as err:
        localize_global(toas[:3], doas[:3], GRID[:3], C)
    assert err.value.kind == "rank-deficient"
    line = np.column_stack([np.arange(5.0), np.zeros(5), np.full(5, 1.2)])
    t, d = observations([1, 7, 2], line)
    with pytest.raises(LocalizationError) as err:
        localize_global(t, d, line, C)
    assert err.value.kind == "rank-deficient"
    bad = toas.copy()
    bad[1] += 0.02
    with pytest.raises(LocalizationError) as err:
        localize_global(bad, doas, GRID, C)
    assert err.value.kind == "infeasible-tdoa"


@settings(max_examples=60, deadline=None)
@given(coord, coord, st.floats(0.3, 4.0), st.booleans())
def test_triplet_exact_recovery(x, y, dz, below):
    src = np.array([x, y, 1.2 + (-dz if below else dz)])
    if np.min(np.linalg.norm(TRIPLET - src, axis=1)) < 0.5:
        return
    toas, doas = observations(src, TRIPLET)
    ev = localize_triplet(toas, doas, TRIPLET, dz=0.1)
    assert abs(ev.position[2] - src[2]) <= 0.1
    assert np.linalg.norm(ev.position[:2] - src[:2]) <= 0.05
    assert ev.angular_cost < 1e-3


def test_sx_candidates_zero_ls_cost():
    src = np.array([3.0, 4.0, 2.5])
    toas, _ = observations(src, TRIPLET)
    cands = sx_candidates(toas, TRIPLET, np.linspace(-2, 2, 9))
    assert len(cands) > 0
    np.testing.assert_allclose(ls_cost_2d(cands, toas, TRIPLET), 0.0, atol=1e-12)
    # the true position is on the candidate curve
    assert np.min(np.linalg.norm(sx_candidates(toas, TRIPLET, [1.3]) - src, axis=1)) < 1e-9


def test_triplet_without_feasible_height():
    toas = np.full(3, 1e-4)
    doas = np.tile([1.0, 0.0, 0.0], (3, 1))
    with pytest.raises(LocalizationError) as err:
        localize_triplet(toas, doas, TRIPLET)
    assert err.value.kind == "localization-failed"


def test_triplet_collinear_is_rank_deficient():
    line = GRID[[0, 1, 2]]
    toas, doas = observations([1, 5, 2], line)
    with pytest.raises(LocalizationError) as err:
        localize_triplet(toas, doas, line)
    assert err.value.kind == "rank-deficient"


def test_ls_cost_3d_zero_at_source(rng):
    pos = rng.uniform(0, 5, (6, 3))
    src = np.array([2.0, 9.0, 3.0])
    toas, _ = observations(src, pos)
    assert ls_cost_3d(src, toas, pos) < 1e-20
    assert ls_cost_3d(src + 0.3, toas, pos) > 1e-3


def test_angular_error_terms():
    src = np.array([5.0, 5.0, 3.0])
    _, doas = observations(src, TRIPLET)
    assert angular_error(src, doas, TRIPLET) == pytest.approx(0.0, abs=1e-12)
    assert angular_error(src, -doas, TRIPLET) == pytest.approx(6.0)
    assert angular_error(TRIPLET[0], doas, TRIPLET) >= 1.0


def test_orientation_correction():
    d = np.array([1.0, 0.0, 0.0])
    ch = np.zeros((4, 2000))
    ch[:, 300] = sh_eval(d, 1)
    a = Arir(ch, 44100.0)
    turned = a.with_channels(rotate_channels(ch, rot_z(np.radians(10))))
    fixed = orientation_correction(turned, d)
    ds = direct_peak(analyze_peaks(fixed)[2])
    assert angle_deg(ds.doa, d) < 0.5
    slight = a.with_channels(rotate_channels(ch, rot_z(np.radians(1))))
    assert orientation_correction(slight, d) is slight
