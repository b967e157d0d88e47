"""Real-valued spherical harmonics (ACN / N3D) and their rotation matrices.

Channel ``acn = n**2 + n + m`` holds order ``n`` and degree ``m``.  The
normalization is N3D without Condon-Shortley phase, so that
``Y_0^0 = 1`` and the first-order block equals ``sqrt(3) * (y, z, x)``.
"""

from math import factorial

import numpy as np
from scipy.special import lpmv

MAX_ORDER = 7


def n_channels(order):
    return (order + 1) ** 2


def order_of_channels(n_ch):
    """Return the SH order for a channel count, or raise if it is not square."""
    order = int(round(np.sqrt(n_ch))) - 1
    if order < 0 or (order + 1) ** 2 != n_ch:
        raise ValueError(f"{n_ch} channels is not a full SH order")
    return order


def acn_order_degree(order):
    """Orders ``n`` and degrees ``m`` of all ACN channels up to `order`."""
    n = np.concatenate([np.full(2 * k + 1, k) for k in range(order + 1)])
    m = np.concatenate([np.arange(-k, k + 1) for k in range(order + 1)])
    return n, m


def order_slices(order):
    """Slices selecting the channels of each order ``0..order``."""
    return [slice(k ** 2, (k + 1) ** 2) for k in range(order + 1)]


def n3d_to_sn3d_gains(order):
    n, _ = acn_order_degree(order)
    return 1.0 / np.sqrt(2 * n + 1)


def azimuth_zenith(dirs):
    """Azimuth and zenith of unit vectors; azimuth is 0 at the poles."""
    dirs = np.asarray(dirs, dtype=float)
    x, y, z = dirs[..., 0], dirs[..., 1], dirs[..., 2]
    azi = np.arctan2(y, x)
    azi = np.where((np.abs(x) < 1e-300) & (np.abs(y) < 1e-300), 0.0, azi)
    zen = np.arccos(np.clip(z, -1.0, 1.0))
    return azi, zen


def sh_eval(dirs, order):
    """Evaluate N3D real spherical harmonics.

    Parameters
    ----------
    dirs : (..., 3) array_like
        Unit direction vectors.
    order : int
        Maximum SH order.

    Returns
    -------
    Y : (..., (order+1)**2) ndarray
        SH values in ACN order.
    """
    if order < 0:
        raise ValueError("order must be >= 0")
    dirs = np.asarray(dirs, dtype=float)
    azi, zen = azimuth_zenith(dirs)
    cos_zen = np.cos(zen)
    out = np.empty(dirs.shape[:-1] + (n_channels(order),))
    for n in range(order + 1):
        for m in range(-n, n + 1):
            am = abs(m)
            # lpmv carries the Condon-Shortley phase, Ambisonics omits it
            leg = (-1) ** am * lpmv(am, n, cos_zen)
            norm = np.sqrt((2 * n + 1) * (2 - (m == 0))
                           * factorial(n - am) / factorial(n + am))
            if m > 0:
                trig = np.cos(m * azi)
            elif m < 0:
                trig = np.sin(am * azi)
            else:
                trig = 1.0
            out[..., n * n + n + m] = norm * leg * trig
    return out


def rot_z(angle):
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def rot_y(angle):
    """Right-handed rotation about +y (turns +z towards +x)."""
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rot_x(angle):
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def ypr_matrix(yaw, pitch, roll):
    """Rotation ``Rz(yaw) @ Ry(pitch) @ Rx(roll)``."""
    return rot_z(yaw) @ rot_y(pitch) @ rot_x(roll)


def rotation_align(source_doa, target_doa):
    """Cartesian rotation taking `source_doa` onto `target_doa`.

    Composed as ``Rz(azi_t) @ Ry(zen_t - zen_s) @ Rz(-azi_s)``: the source
    direction is turned into the x-z half plane, tilted to the target
    zenith and turned to the target azimuth.
    """
    azi_s, zen_s = azimuth_zenith(np.asarray(source_doa, dtype=float))
    azi_t, zen_t = azimuth_zenith(np.asarray(target_doa, dtype=float))
    return rot_z(azi_t) @ rot_y(zen_t - zen_s) @ rot_z(-azi_s)


def _check_rotation(R):
    R = np.asarray(R, dtype=float)
    if R.shape[-2:] != (3, 3):
        raise ValueError("rotation must be 3x3")
    eye = np.eye(3)
    err = np.abs(np.swapaxes(R, -1, -2) @ R - eye).max() if R.size else 0.0
    if err > 1e-6:
        raise ValueError(f"matrix is not orthogonal (|R^T R - I| = {err:.3g})")
    if np.any(np.linalg.det(R) < 0):
        raise ValueError("matrix is a reflection, not a rotation")
    return R


def sh_rotation(R, order):
    """SH-domain rotation matrix by the Ivanic-Ruedenberg recursion.

    Satisfies ``sh_eval(R @ theta) == sh_rotation(R) @ sh_eval(theta)``.

    Parameters
    ----------
    R : (..., 3, 3) array_like
        Cartesian rotation matrices; leading dimensions are batched.
    order : int
        SH order.

    Returns
    -------
    (..., (order+1)**2, (order+1)**2) ndarray
        Block-diagonal rotation matrices.
    """
    R = _check_rotation(R)
    batch = R.shape[:-2]
    n_ch = n_channels(order)
    out = np.zeros(batch + (n_ch, n_ch))
    out[..., 0, 0] = 1.0
    if order == 0:
        return out
    # order-one block in (y, z, x) channel order; index 0..2 <-> m = -1..1
    perm = [1, 2, 0]
    r1 = R[..., perm, :][..., :, perm]
    out[..., 1:4, 1:4] = r1
    prev = r1
    for l in range(2, order + 1):
        cur = np.zeros(batch + (2 * l + 1, 2 * l + 1))
        for m in range(-l, l + 1):
            for n in range(-l, l + 1):
                cur[..., m + l, n + l] = _band_entry(r1, prev, l, m, n)
        out[..., l * l:(l + 1) ** 2, l * l:(l + 1) ** 2] = cur
        prev = cur
    return out


def _band_entry(r1, prev, l, m, n):
    d = 1.0 if m == 0 else 0.0
    denom = (2 * l) * (2 * l - 1) if abs(n) == l else (l + n) * (l - n)
    u = np.sqrt((l + m) * (l - m) / denom)
    v = 0.5 * np.sqrt((1 + d) * (l + abs(m) - 1) * (l + abs(m)) / denom) * (1 - 2 * d)
    w = -0.5 * np.sqrt((l - abs(m) - 1) * (l - abs(m)) / denom) * (1 - d)
    val = 0.0
    if u != 0:
        val = val + u * _P(0, l, m, n, r1, prev)
    if v != 0:
        val = val + v * _V(l, m, n, r1, prev)
    if w != 0:
        val = val + w * _W(l, m, n, r1, prev)
    return val


def _P(i, l, a, b, r1, prev):
    ri1 = r1[..., i + 1, 2]
    rim1 = r1[..., i + 1, 0]
    ri0 = r1[..., i + 1, 1]
    k = l - 1
    if b == l:
        return ri1 * prev[..., a + k, 2 * k] - rim1 * prev[..., a + k, 0]
    if b == -l:
        return ri1 * prev[..., a + k, 0] + rim1 * prev[..., a + k, 2 * k]
    return ri0 * prev[..., a + k, b + k]


def _V(l, m, n, r1, prev):
    if m == 0:
        return _P(1, l, 1, n, r1, prev) + _P(-1, l, -1, n, r1, prev)
    if m > 0:
        d = 1.0 if m == 1 else 0.0
        return (_P(1, l, m - 1, n, r1, prev) * np.sqrt(1 + d)
                - _P(-1, l, -m + 1, n, r1, prev) * (1 - d))
    d = 1.0 if m == -1 else 0.0
    return (_P(1, l, m + 1, n, r1, prev) * (1 - d)
            + _P(-1, l, -m - 1, n, r1, prev) * np.sqrt(1 + d))


def _W(l, m, n, r1, prev):
    if m > 0:
        return _P(1, l, m + 1, n, r1, prev) + _P(-1, l, -m - 1, n, r1, prev)
    return _P(1, l, m - 1, n, r1, prev) - _P(-1, l, -m + 1, n, r1, prev)


def rotate_channels(channels, R):
    """Rotate an SH signal ``(C, T)`` by the Cartesian rotation `R`."""
    channels = np.asarray(channels)
    order = order_of_channels(channels.shape[0])
    return sh_rotation(R, order) @ channels
