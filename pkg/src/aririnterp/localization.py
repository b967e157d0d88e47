"""TDOA localization of sound events seen by a horizontal ARIR grid.

Both estimators work on the spherical least-squares error of the range
differences relative to a reference perspective.  A horizontal grid leaves
the sign of the event height undetermined; it is resolved with the DOAs
observed at each perspective.
"""

from dataclasses import dataclass

import numpy as np
from scipy.optimize import least_squares, minimize_scalar

from .core import SPEED_OF_SOUND
from .sh import rotation_align, rotate_channels


class LocalizationError(ValueError):
    """Localization impossible; ``kind`` names the reason."""

    def __init__(self, kind, message):
        super().__init__(message)
        self.kind = kind


@dataclass
class SoundEvent:
    """Localized sound event.

    Attributes
    ----------
    position : (3,) ndarray
    angular_cost : float
        Angular error of the observed DOAs w.r.t. the position.
    ls_cost : float
        Spherical LS cost (m^2) of the range differences.
    kind : str
        ``"direct"``, ``"triplet"`` or ``"instantaneous"``.
    """

    position: np.ndarray
    angular_cost: float = 0.0
    ls_cost: float = 0.0
    kind: str = "triplet"


def angular_error(candidate, doas, positions):
    """Sum over perspectives of ``1 - doa_i . unit(candidate - x_i)``.

    Vectorized over leading dimensions of `candidate` ``(..., 3)``.  A
    perspective closer than 1 mm to the candidate contributes 1.
    """
    cand = np.asarray(candidate, dtype=float)[..., None, :]
    vec = cand - np.asarray(positions, dtype=float)
    dist = np.linalg.norm(vec, axis=-1)
    ok = dist >= 1e-3
    safe = np.where(ok, dist, 1.0)
    cosang = np.einsum("...pk,pk->...p", vec / safe[..., None], np.asarray(doas, dtype=float))
    return np.where(ok, 1.0 - cosang, 1.0).sum(axis=-1)


def _tdoa_system(toas, positions, c):
    """Reference-shifted geometry ``(S_2D, d, b, origin)`` of the LS error."""
    positions = np.asarray(positions, dtype=float)
    toas = np.asarray(toas, dtype=float)
    origin = positions[0]
    rel = positions[1:] - origin
    S = rel[:, :2]
    d = c * (toas[1:] - toas[0])
    r = np.linalg.norm(rel, axis=1)
    b = 0.5 * (r ** 2 - d ** 2)
    return S, d, b, origin, r


def ls_cost_2d(candidate, toas, positions, c=SPEED_OF_SOUND):
    """Horizontal-grid spherical LS cost of `candidate` (absolute coords)."""
    S, d, b, origin, _ = _tdoa_system(toas, positions, c)
    x = np.asarray(candidate, dtype=float) - origin
    e = x[..., :2] @ S.T + np.linalg.norm(x, axis=-1)[..., None] * d - b
    return (e ** 2).sum(axis=-1)


def ls_cost_3d(candidate, toas, positions, c=SPEED_OF_SOUND):
    """Full 3-D spherical LS cost (for arbitrary receiver layouts)."""
    positions = np.asarray(positions, dtype=float)
    toas = np.asarray(toas, dtype=float)
    origin = positions[0]
    rel = positions[1:] - origin
    d = c * (toas[1:] - toas[0])
    b = 0.5 * ((rel ** 2).sum(axis=1) - d ** 2)
    x = np.asarray(candidate, dtype=float) - origin
    e = x @ rel.T + np.linalg.norm(x, axis=-1)[..., None] * d - b
    return (e ** 2).sum(axis=-1)


def _check(S, d, r, tol):
    cond = np.linalg.cond(S) if S.size else np.inf
    if not np.isfinite(cond) or cond > 1e8:
        raise LocalizationError("rank-deficient",
                                "perspectives are collinear (condition number "
                                f"{cond:.3g})")
    bad = np.abs(d) > r + tol
    if np.any(bad):
        raise LocalizationError("infeasible-tdoa",
                                "range difference exceeds perspective spacing")


def localize_global(toas, doas, positions, c=SPEED_OF_SOUND, tol=0.01):
    """Localize the direct sound from all perspectives of a grid.

    Parameters
    ----------
    toas : (P,) array_like
        Direct-sound TOAs in seconds (possibly including a uniform delay).
    doas : (P, 3) array_like
        Direct-sound DOAs.
    positions : (P, 3) array_like
        Perspective positions on one horizontal plane.
    tol : float
        Slack (m) on the physical range-difference bound.

    Returns
    -------
    event : SoundEvent
    system_delay : float
        Mean of ``T_i - |x_s - x_i| / c``.
    """
    positions = np.asarray(positions, dtype=float)
    toas = np.asarray(toas, dtype=float)
    if len(positions) < 4:
        raise LocalizationError("rank-deficient", "need at least four perspectives")
    S, d, b, origin, r = _tdoa_system(toas, positions, c)
    _check(S, d, r, tol)
    # unconstrained linear LS over (x, y, r)
    A = np.column_stack([S, d])
    sol, *_ = np.linalg.lstsq(A, b, rcond=None)
    xy0, r0 = sol[:2], sol[2]

    def resid(p):
        return S @ p[:2] + np.linalg.norm(p) * d - b

    starts = {max(r0 ** 2 - xy0 @ xy0, 0.0) ** 0.5}
    starts.update(np.linspace(0.0, max(abs(r0), 1.0), 5))
    best = None
    for z0 in starts:
        res = least_squares(resid, np.r_[xy0, z0], bounds=([-np.inf, -np.inf, 0.0], np.inf),
                            xtol=1e-15, ftol=1e-15, gtol=1e-15, method="trf")
        if best is None or res.cost < best.cost:
            best = res
    cands = np.array([best.x, best.x * (1, 1, -1)]) + origin
    costs = angular_error(cands, doas, positions)
    k = int(np.argmin(costs))
    pos = cands[k]
    delay = float(np.mean(toas - np.linalg.norm(positions - pos, axis=1) / c))
    return SoundEvent(pos, float(costs[k]), float(2 * best.cost), "direct"), delay


def _sx_coefficients(toas, positions, c):
    S, d, b, origin, r = _tdoa_system(toas, positions, c)
    Sinv = np.linalg.inv(S)
    u, v = Sinv @ b, Sinv @ d
    return u, v, 1.0 - v @ v, 2.0 * (u @ v), origin


def _positive_roots(alpha, beta, gamma):
    """Real positive roots of ``alpha r^2 + beta r + gamma`` (vectorized in
    `gamma`), as two arrays with NaN where a root does not qualify.

    Uses the cancellation-free form of the quadratic formula, which matters
    for far events where ``alpha`` is close to zero.
    """
    gamma = np.asarray(gamma, dtype=float)
    if abs(alpha) < 1e-14:
        r1 = -gamma / beta if abs(beta) > 1e-15 else np.full_like(gamma, np.nan)
        r2 = np.full_like(gamma, np.nan)
    else:
        disc = beta ** 2 - 4 * alpha * gamma
        sq = np.sqrt(np.where(disc >= 0, disc, np.nan))
        q = -0.5 * (beta + np.copysign(sq, beta))
        with np.errstate(divide="ignore", invalid="ignore"):
            r1 = q / alpha
            r2 = np.where(q != 0, gamma / q, np.nan)
    r1 = np.where(r1 > 0, r1, np.nan)
    r2 = np.where(r2 > 0, r2, np.nan)
    return r1, r2


def sx_candidates(toas, positions, z_values, c=SPEED_OF_SOUND):
    """Spherical-intersection candidates of a horizontal triplet.

    Returns the absolute candidate positions ``(K, 3)`` for all real positive
    range roots at the given relative heights `z_values`.
    """
    u, v, alpha, beta, origin = _sx_coefficients(toas, positions, c)
    z = np.asarray(z_values, dtype=float)
    out = []
    for rt in _positive_roots(alpha, beta, -(u @ u) - z ** 2):
        ok = np.isfinite(rt)
        xy = u[None, :] - rt[ok, None] * v[None, :]
        out.append(np.column_stack([xy, z[ok]]))
    return np.vstack(out) + origin


def _feasible(cands, positions, toas, c, tol):
    dist = np.linalg.norm(cands[..., None, :] - positions, axis=-1)
    return np.all(dist <= c * toas + tol, axis=-1)


def localize_triplet(toas, doas, positions, dz=0.1, c=SPEED_OF_SOUND, tol=0.02,
                     refine=True, n_seeds=3):
    """Localize a sound event seen by three perspectives.

    The event height is searched on a grid of step `dz` up to the flight
    distance ``c * max(T_i)``, extended by the two heights at which the
    range from the first perspective equals its flight distance.  For every height the range roots of the
    spherical intersection give candidates, which must lie inside every
    flight-time ball ``|x - x_i| <= c T_i + tol``; the candidate with the
    smallest angular error is returned.  With `refine`, the height is then
    optimized continuously within one grid step of the `n_seeds` best
    grid-local minima of each root branch.

    Parameters
    ----------
    toas : (3,) array_like
        Flight times in seconds (system delay removed).
    doas : (3, 3) array_like
    positions : (3, 3) array_like

    Raises
    ------
    LocalizationError
        ``"rank-deficient"`` for collinear perspectives,
        ``"localization-failed"`` when no candidate is feasible.
    """
    positions = np.asarray(positions, dtype=float)
    toas = np.asarray(toas, dtype=float)
    doas = np.asarray(doas, dtype=float)
    if positions.shape != (3, 3):
        raise ValueError("triplet localization needs three perspectives")
    S, d, b, origin, r = _tdoa_system(toas, positions, c)
    _check(S, d, r, np.inf)
    z_max = c * toas.max()
    if not z_max > 0:
        raise LocalizationError("localization-failed", "non-positive flight times")
    u, v, alpha, beta, origin = _sx_coefficients(toas, positions, c)
    k = int(np.floor(z_max / dz))
    z = dz * np.arange(-k, k + 1)
    # heights where the reference flight-time ball is met exactly; between
    # grid points the feasible height interval can be far narrower than dz
    r0 = c * toas[0]
    z2 = alpha * r0 ** 2 + beta * r0 - u @ u
    if z2 > 0 and np.sqrt(z2) <= z_max:
        z = np.union1d(z, [-np.sqrt(z2), np.sqrt(z2)])
    roots = _positive_roots(alpha, beta, -(u @ u) - z ** 2)

    def make(rt, zz):
        return np.concatenate([u - rt * v, [zz]]) + origin

    # grid-local minima of the angular error on each root branch
    seeds = []
    for branch, rt in enumerate(roots):
        ok = np.isfinite(rt)
        if not ok.any():
            continue
        cands = np.column_stack([u[None, :] - rt[ok, None] * v[None, :], z[ok]]) + origin
        cost = np.full(len(z), np.inf)
        feas = _feasible(cands, positions, toas, c, tol)
        cost[np.flatnonzero(ok)[feas]] = angular_error(cands[feas], doas, positions)
        padded = np.r_[np.inf, cost, np.inf]
        local = np.flatnonzero((cost <= padded[:-2]) & (cost <= padded[2:]) & np.isfinite(cost))
        for j in local[np.argsort(cost[local])][:n_seeds]:
            seeds.append((float(cost[j]), make(rt[j], z[j]), branch))
    if not seeds:
        raise LocalizationError("localization-failed", "no feasible event height")
    seeds.sort(key=lambda s: s[0])
    if refine:
        seeds = [_refine_height(cost, pos, branch, u, v, alpha, beta, origin,
                                doas, positions, toas, c, tol, dz)
                 for cost, pos, branch in seeds]
    cost, pos = min(seeds, key=lambda s: s[0])[:2]
    return SoundEvent(pos, cost, float(ls_cost_2d(pos, toas, positions, c)), "triplet")


def _refine_height(cost, pos, branch, u, v, alpha, beta, origin, doas, positions,
                   toas, c, tol, dz):
    z0 = pos[2] - origin[2]

    def candidate(zz):
        rt = _positive_roots(alpha, beta, -(u @ u) - zz ** 2)[branch]
        if not np.isfinite(rt):
            return None
        x = np.concatenate([u - rt * v, [zz]]) + origin
        return x if _feasible(x, positions, toas, c, tol) else None

    def f(zz):
        x = candidate(zz)
        return 1e3 if x is None else float(angular_error(x, doas, positions))

    res = minimize_scalar(f, bounds=(z0 - dz, z0 + dz), method="bounded",
                          options={"xatol": 1e-5})
    if res.fun < cost:
        x = candidate(res.x)
        if x is not None:
            return float(res.fun), x
    return cost, pos


def orientation_correction(arir, expected_doa, threshold_deg=3.0, peak_cfg=None):
    """Rotate `arir` so its direct-sound DOA matches `expected_doa`.

    Nothing happens when the deviation is below `threshold_deg`.
    """
    from .peaks import analyze_peaks, direct_peak

    _, _, peaks = analyze_peaks(arir, peak_cfg)
    ds = direct_peak(peaks)
    if ds is None:
        return arir
    expected = np.asarray(expected_doa, dtype=float)
    expected = expected / np.linalg.norm(expected)
    dev = np.degrees(np.arccos(np.clip(ds.doa @ expected, -1.0, 1.0)))
    if dev < threshold_deg:
        return arir
    R = rotation_align(ds.doa, expected)
    return arir.with_channels(rotate_channels(arir.channels, R))
