"""Iterative matching of early peaks across a perspective triplet."""

from dataclasses import dataclass, field

import numpy as np

from .core import SPEED_OF_SOUND
from .localization import LocalizationError, SoundEvent, localize_triplet


@dataclass
class MatchConfig:
    """Matching settings.

    Attributes
    ----------
    n_matches : int
        Number of matches including the direct sound.
    dz : float
        Height step of the triplet localizer (m).
    accept : float
        Largest accepted combined cost.
    alpha_decay : float
        Time (s) after the direct sound over which the distance-law exponent
        falls from 1 to 0.
    window_slack : float
        Extra tolerance (samples) on the feasible TDOA window.
    """

    n_matches: int = 11
    dz: float = 0.1
    accept: float = 1.0
    alpha_decay: float = 0.050
    window_slack: float = 1.0


@dataclass
class PeakMatch:
    """Peaks of one sound event in each perspective of a triplet.

    Attributes
    ----------
    index : int
        Match number, 1 for the direct sound.
    peaks : list of Peak
        One peak per triplet perspective, in triplet order.
    reference : int
        Triplet slot of the reference peak.
    event : SoundEvent
    cost : float
    """

    index: int
    peaks: list
    reference: int
    event: SoundEvent
    cost: float = 0.0
    toas: np.ndarray = field(init=False)

    def __post_init__(self):
        self.toas = np.array([p.toa for p in self.peaks])


def alpha_schedule(t, t_direct, decay=0.050):
    """Distance-law exponent: 1 up to the direct sound, cos^2 taper to 0."""
    x = np.clip((np.asarray(t, dtype=float) - t_direct) / decay, 0.0, 1.0)
    return np.cos(np.pi * x / 2) ** 2


def amplitude_error(event, magnitudes, positions, alphas):
    """Spread of distance-weighted peak amplitudes, in ``[0, 1]``.

    Zero when ``magnitude_i * D_i**alpha_i`` is equal for all perspectives,
    one when a single perspective carries everything.
    """
    dist = np.linalg.norm(np.asarray(positions, dtype=float) - event, axis=1)
    rho = np.asarray(magnitudes, dtype=float) * np.maximum(dist, 1e-12) ** np.asarray(alphas)
    if np.any(rho <= 0) or not np.all(np.isfinite(rho)):
        return 1.0
    n = len(rho)
    val = (np.sqrt(n) * np.sqrt(np.sum(rho ** 2)) / np.sum(rho) - 1) / (np.sqrt(n) - 1)
    return float(np.clip(val, 0.0, 1.0))


def match_cost(event, peaks, positions, direct_toas, decay):
    """Combined angular and amplitude inconsistency, each limited to 1."""
    alphas = [alpha_schedule(p.toa, td, decay) for p, td in zip(peaks, direct_toas)]
    j_amp = amplitude_error(event.position, [p.magnitude for p in peaks], positions, alphas)
    return min(event.angular_cost, 1.0) + j_amp


def match_peaks(triplet_peaks, positions, direct_peaks, direct_event,
                system_delay=0.0, sample_rate=44100.0, cfg=None,
                c=SPEED_OF_SOUND):
    """Match early peaks of three perspectives into common sound events.

    Parameters
    ----------
    triplet_peaks : list of 3 lists of Peak
        Detected peaks per perspective (including the direct sound).
    positions : (3, 3) array_like
    direct_peaks : list of 3 Peak
        Direct-sound peak of each perspective.
    direct_event : SoundEvent
        Globally localized direct source.
    system_delay : float
        Uniform delay (s) contained in all TOAs.

    Returns
    -------
    list of PeakMatch
        Match 1 is the direct sound; the others follow in acceptance order.
    """
    cfg = cfg or MatchConfig()
    positions = np.asarray(positions, dtype=float)
    direct_toas = [p.toa for p in direct_peaks]
    matches = [PeakMatch(1, list(direct_peaks), 0, direct_event, 0.0)]
    used = [{id(direct_peaks[i])} for i in range(3)]
    skipped = set()
    slack = cfg.window_slack / sample_rate

    def free(i):
        return [p for p in triplet_peaks[i] if id(p) not in used[i]]

    while len(matches) < cfg.n_matches:
        refs = [(p, i) for i in range(3) for p in free(i) if id(p) not in skipped]
        if not refs:
            break
        ref, a = min(refs, key=lambda pi: (-pi[0].magnitude, pi[0].toa, pi[1]))
        others = [i for i in range(3) if i != a]
        cands = []
        for i in others:
            win = np.linalg.norm(positions[a] - positions[i]) / c + slack
            cands.append([p for p in free(i) if abs(p.toa - ref.toa) <= win])
        if not cands[0] or not cands[1]:
            skipped.add(id(ref))
            continue
        best = None
        for pb in cands[0]:
            for pc in cands[1]:
                trip = [None] * 3
                trip[a], trip[others[0]], trip[others[1]] = ref, pb, pc
                toas = np.array([p.toa for p in trip]) - system_delay
                doas = np.array([p.doa for p in trip])
                try:
                    ev = localize_triplet(toas, doas, positions, cfg.dz, c)
                except LocalizationError:
                    continue
                cost = match_cost(ev, trip, positions, direct_toas, cfg.alpha_decay)
                key = (cost, pb.toa + pc.toa)
                if best is None or key < best[0]:
                    best = (key, trip, ev)
        if best is None or best[0][0] > cfg.accept:
            skipped.add(id(ref))
            continue
        (cost, _), trip, ev = best
        matches.append(PeakMatch(len(matches) + 1, trip, a, ev, cost))
        for i, p in enumerate(trip):
            used[i].add(id(p))
    return matches
