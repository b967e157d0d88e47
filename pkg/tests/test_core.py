import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aririnterp.core import (Arir, ArirGrid, Lattice, ListenerPose, OutsideGridWarning,
                             as_direction, grid_weights)
from aririnterp.oracle import lattice_positions
from aririnterp.sh import ypr_matrix

POS = lattice_positions((0.0, 0.0), (3, 3), 2.0, 1.5)


def test_arir_validation():
    a = Arir(np.zeros((4, 10)), 48000.0, (1, 2, 3))
    assert a.order == 1 and a.n_samples == 10
    with pytest.raises(ValueError):
        Arir(np.zeros((5, 10)), 48000.0)
    with pytest.raises(ValueError):
        Arir(np.zeros((4, 10)), 0.0)
    assert a.padded(15).n_samples == 15
    with pytest.raises(ValueError):
        a.padded(5)


def test_as_direction_requires_unit_norm():
    as_direction([0, 0, 1])
    with pytest.raises(ValueError):
        as_direction([0, 0, 2])


def test_lattice_rejects_irregular_layouts():
    with pytest.raises(ValueError):
        Lattice(POS + np.array([0, 0, 1.0]) * np.arange(9)[:, None] * 0.1, 2.0)
    bad = POS.copy()
    bad[4, 0] += 0.3
    with pytest.raises(ValueError):
        Lattice(bad, 2.0)
    with pytest.raises(ValueError):
        Lattice(np.vstack([POS, POS[:1]]), 2.0)


def test_triplet_selection_nearest_corners_and_ties():
    lat = Lattice(POS, 2.0)
    assert lat.select_triplet([0.3, 0.4, 1.5]) == [0, 3, 1]  # sorted by distance
    assert lat.select_triplet([3.9, 3.8, 1.5]) == [8, 5, 7]
    # cell center: all four corners equidistant, lower indices win
    assert lat.select_triplet([1.0, 1.0, 1.5]) == [0, 1, 3]


def test_triplet_outside_grid_warns():
    lat = Lattice(POS, 2.0)
    with pytest.warns(OutsideGridWarning):
        lat.select_triplet([-1.0, 1.0, 1.5])


@settings(max_examples=200, deadline=None)
@given(st.floats(0, 4), st.floats(0, 4))
def test_weights_sum_to_one_and_are_nonnegative(x, y):
    lat = Lattice(POS, 2.0)
    idx = lat.select_triplet([x, y, 1.5])
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        w = grid_weights([x, y, 1.5], POS[idx], 2.0)
    assert np.all(w >= 0)
    assert w.sum() == pytest.approx(1.0, abs=1e-12)


def test_weights_one_hot_at_node_and_symmetric_at_center():
    w = grid_weights(POS[4], POS[[4, 5, 7]], 2.0)
    assert list(w) == [1.0, 0.0, 0.0]
    w = grid_weights([1.0, 0.0, 1.5], POS[[0, 1, 3]], 2.0)
    np.testing.assert_allclose(w, [0.5, 0.5, 0.0], atol=1e-15)


def test_weights_match_cos2_law():
    x = np.array([0.5, 0.7, 1.5])
    raw = [np.cos(np.pi * 0.5 / 4) ** 2 * np.cos(np.pi * 0.7 / 4) ** 2,
           np.cos(np.pi * 1.5 / 4) ** 2 * np.cos(np.pi * 0.7 / 4) ** 2,
           np.cos(np.pi * 0.5 / 4) ** 2 * np.cos(np.pi * 1.3 / 4) ** 2]
    np.testing.assert_allclose(grid_weights(x, POS[[0, 1, 3]], 2.0), raw / np.sum(raw))


def test_grid_consistency_checks():
    a = [Arir(np.zeros((4, 8)), 44100.0, p) for p in POS]
    g = ArirGrid(a, 2.0)
    assert len(g) == 9 and g.order == 1 and g.plane_height == pytest.approx(1.5)
    b = list(a)
    b[2] = Arir(np.zeros((9, 8)), 44100.0, POS[2])
    with pytest.raises(ValueError):
        ArirGrid(b, 2.0)
    b[2] = Arir(np.zeros((4, 8)), 48000.0, POS[2])
    with pytest.raises(ValueError):
        ArirGrid(b, 2.0)


def test_pose_parse_and_rotations():
    p = ListenerPose.parse("1,2,3,90,0,0")
    np.testing.assert_allclose(p.position, [1, 2, 3])
    np.testing.assert_allclose(p.head_rotation(), ypr_matrix(np.pi / 2, 0, 0))
    # turning the head left by 90 deg puts a frontal source on the right
    np.testing.assert_allclose(p.scene_rotation() @ [1, 0, 0], [0, -1, 0], atol=1e-15)
    with pytest.raises(ValueError):
        ListenerPose.parse("1,2")
