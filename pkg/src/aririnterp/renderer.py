"""Fine-grid precomputation and dynamic rendering along listener trajectories.

The expensive perspective synthesis is evaluated offline on a fine lattice.
At render time the ARIR of a pose is obtained by time-aligned linear
interpolation of the enclosing fine nodes and convolved with a source signal
by a uniformly partitioned overlap-add convolver whose filter is refreshed
once per frame.
"""

import json
import os
from dataclasses import dataclass

import numpy as np
from scipy.fft import irfft, rfft

from .core import Arir, Lattice, ListenerPose, grid_weights
from .dsp import delay_signal
from .filterbank import ThirdOctaveBank, band_frame_power, envelope_correction
from .interpolation import synthesize_perspective
from .sh import order_slices, sh_rotation

LATE_SPLIT = 0.100
FRAME_SIZE = 1024
_LATE_FADE = 64


@dataclass
class FineGrid:
    """Precomputed ARIRs on a fine horizontal lattice.

    Attributes
    ----------
    channels : (K, C, T) ndarray
        Node ARIRs (may be a read-only memory map).
    positions : (K, 3) ndarray
    spacing : float
    sample_rate : float
    toas : (K,) ndarray
        Direct-sound TOA of every node in seconds.
    late_split : float
        Time (s) after which only the nearest node is used.
    """

    channels: np.ndarray
    positions: np.ndarray
    spacing: float
    sample_rate: float
    toas: np.ndarray
    late_split: float = LATE_SPLIT

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=float)
        self.toas = np.asarray(self.toas, dtype=float)
        if self.channels.ndim != 3 or len(self.channels) != len(self.positions):
            raise ValueError("channels must be (K, C, T) with one ARIR per position")
        self.lattice = Lattice(self.positions, self.spacing)

    @property
    def order(self):
        return int(round(np.sqrt(self.channels.shape[1]))) - 1

    @property
    def n_samples(self):
        return self.channels.shape[2]

    def arir(self, k):
        return Arir(np.array(self.channels[k]), self.sample_rate, self.positions[k])

    def save(self, directory):
        """Store as ``channels.npy`` plus ``fine_grid.json`` in `directory`."""
        os.makedirs(directory, exist_ok=True)
        np.save(os.path.join(directory, "channels.npy"),
                np.ascontiguousarray(self.channels, dtype=np.float64))
        meta = {"positions": self.positions.tolist(), "spacing": self.spacing,
                "sample_rate": self.sample_rate, "toas": self.toas.tolist(),
                "late_split": self.late_split}
        with open(os.path.join(directory, "fine_grid.json"), "w") as fh:
            json.dump(meta, fh, indent=1)

    @classmethod
    def load(cls, directory, mmap=True):
        """Load a stored fine grid; the samples are memory-mapped by default."""
        with open(os.path.join(directory, "fine_grid.json")) as fh:
            meta = json.load(fh)
        chans = np.load(os.path.join(directory, "channels.npy"),
                        mmap_mode="r" if mmap else None)
        return cls(chans, np.array(meta["positions"]), meta["spacing"],
                   meta["sample_rate"], np.array(meta["toas"]), meta["late_split"])


def fine_lattice(coarse_lattice, r_fine):
    """Node positions (x fastest) of a lattice of step `r_fine` covering the
    coarse lattice's bounding rectangle."""
    lo = coarse_lattice.origin
    n_i, n_j = coarse_lattice.shape
    ext = np.array([(n_i - 1), (n_j - 1)]) * coarse_lattice.spacing
    counts = np.round(ext / r_fine).astype(int) + 1
    if np.any(np.abs((counts - 1) * r_fine - ext) > 1e-6):
        raise ValueError("fine spacing must divide the coarse spacing")
    jj, ii = np.meshgrid(np.arange(counts[1]), np.arange(counts[0]), indexing="ij")
    xy = lo[:2] + r_fine * np.column_stack([ii.ravel(), jj.ravel()])
    return np.column_stack([xy, np.full(len(xy), coarse_lattice.plane_height)])


def direct_toas(positions, source, system_delay, c):
    """Geometric direct-sound TOAs of `positions`."""
    return np.linalg.norm(np.asarray(positions) - source, axis=1) / c + system_delay


def precompute_fine_grid(prepared, r_fine=0.25, late_split=LATE_SPLIT, progress=None):
    """Synthesize the ARIR at every node of a fine lattice.

    Parameters
    ----------
    prepared : PreparedGrid
    r_fine : float
        Fine lattice spacing (m); must divide the coarse spacing.
    progress : callable, optional
        Called as ``progress(k, K)`` after each node.
    """
    grid = prepared.grid
    positions = fine_lattice(grid.lattice, r_fine)
    chans = np.empty((len(positions), grid.arirs[0].channels.shape[0], grid.n_samples))
    for k, x in enumerate(positions):
        chans[k] = synthesize_perspective(prepared, ListenerPose(x)).channels
        if progress is not None:
            progress(k + 1, len(positions))
    toas = direct_toas(positions, prepared.source.position, prepared.system_delay,
                       grid.speed_of_sound)
    return FineGrid(chans, positions, r_fine, grid.sample_rate, toas, late_split)


def order_band_power(channels, bank, avg=0.010, hop=0.005):
    """Short-time band power ``(N+1, B, F)`` summed within each order."""
    order = int(round(np.sqrt(channels.shape[0]))) - 1
    power, _ = band_frame_power(channels, bank, avg, hop)         # (B, C, F)
    return np.stack([power[:, sl].sum(axis=1) for sl in order_slices(order)])


def fine_interpolate(fine, pose, fractional=True, correct=True, bank=None):
    """Time-aligned linear interpolation of the fine grid at `pose`.

    Up to `late_split` the enclosing nodes are shifted to the weighted mean
    direct-sound TOA ``sum_i g_i T_i`` and combined with the weights ``g_i``,
    followed by a per-order third-octave energy correction to the weighted
    node energies.  Later samples come from the nearest node alone (joined
    by a short cos^2 crossfade); the head rotation is applied last.

    Parameters
    ----------
    fine : FineGrid
    pose : ListenerPose
    fractional : bool
        Windowed-sinc fractional alignment; integer shifts otherwise.
    correct : bool
        Apply the band-energy correction to the early part.
    """
    fs = fine.sample_rate
    idx = fine.lattice.select_triplet(pose.position)
    w = grid_weights(pose.position, fine.positions[idx], fine.spacing)
    t_ds = float(w @ fine.toas[idx])
    n = fine.n_samples
    split = min(int(round(fine.late_split * fs)), n)
    live = [k for k in range(3) if w[k] > 0]
    aligned = []
    for k in live:
        x = np.asarray(fine.channels[idx[k]], dtype=float)
        shift = (t_ds - fine.toas[idx[k]]) * fs
        if not fractional:
            shift = float(np.round(shift))
        aligned.append(x if shift == 0 else delay_signal(x, shift))
    early = sum(w[k] * a for k, a in zip(live, aligned))
    if correct and len(live) > 1:
        bank = bank or ThirdOctaveBank(fs)
        target = sum(w[k] * order_band_power(a[:, :split], bank)
                     for k, a in zip(live, aligned))
        early[:, :split], _ = envelope_correction(early[:, :split], target, bank,
                                                  on_zero=0.0)
    nearest = idx[int(np.argmax(w))]
    late = np.asarray(fine.channels[nearest], dtype=float)
    fade = np.ones(n)
    lo, hi = max(split - _LATE_FADE // 2, 0), min(split + _LATE_FADE // 2, n)
    fade[hi:] = 0.0
    if hi > lo:
        fade[lo:hi] = np.cos(0.5 * np.pi * (np.arange(hi - lo) + 0.5) / (hi - lo)) ** 2
    d = fade * early + (1.0 - fade) * late
    R = pose.scene_rotation()
    if not np.allclose(R, np.eye(3), atol=1e-12):
        d = sh_rotation(R, fine.order) @ d
    return Arir(d, fs, pose.position, delay_compensated=False)


@dataclass
class Trajectory:
    """Timestamped listener poses (times in seconds, increasing)."""

    times: np.ndarray
    poses: list

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        if len(self.times) != len(self.poses) or not len(self.poses):
            raise ValueError("trajectory needs one time per pose and at least one pose")
        if np.any(np.diff(self.times) < 0):
            raise ValueError("trajectory timestamps must be monotone")

    @classmethod
    def from_records(cls, records):
        """From dicts with ``t_seconds, x, y, z`` and optional ``yaw, pitch,
        roll`` in degrees."""
        recs = sorted(records, key=lambda r: float(r["t_seconds"]))
        poses = [ListenerPose([r["x"], r["y"], r["z"]],
                              np.radians([r.get("yaw", 0.0), r.get("pitch", 0.0),
                                          r.get("roll", 0.0)]))
                 for r in recs]
        return cls([float(r["t_seconds"]) for r in recs], poses)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_records(json.load(fh))

    def pose_at(self, t):
        """Linearly interpolated pose; the first/last pose is held outside."""
        k = int(np.searchsorted(self.times, t, side="right"))
        if k == 0:
            return self.poses[0]
        if k >= len(self.poses):
            return self.poses[-1]
        t0, t1 = self.times[k - 1], self.times[k]
        a = 0.0 if t1 <= t0 else (t - t0) / (t1 - t0)
        p0, p1 = self.poses[k - 1], self.poses[k]
        ypr = (1 - a) * np.array(p0.yaw_pitch_roll) + a * np.array(p1.yaw_pitch_roll)
        return ListenerPose((1 - a) * p0.position + a * p1.position, tuple(ypr))


class PartitionedConvolver:
    """Uniformly partitioned overlap-add convolution with switchable filter.

    Each input frame of `frame` samples is transformed with a ``2 frame``
    point DFT and kept in a frequency-domain delay line; the output frame is
    the inverse DFT of the sum of delayed input spectra times the filter
    partition spectra, overlap-added into the output.
    """

    def __init__(self, frame=FRAME_SIZE):
        if frame < 1:
            raise ValueError("frame size must be positive")
        self.frame = int(frame)

    def partition(self, filt):
        """Partition spectra ``(S, C, frame + 1)`` of a ``(C, L)`` filter."""
        filt = np.atleast_2d(np.asarray(filt, dtype=float))
        T = self.frame
        n_seg = max(-(-filt.shape[1] // T), 1)
        padded = np.zeros((filt.shape[0], n_seg * T))
        padded[:, :filt.shape[1]] = filt
        segs = padded.reshape(filt.shape[0], n_seg, T).transpose(1, 0, 2)
        return rfft(segs, 2 * T, axis=-1)

    def run(self, signal, filter_for_frame, n_channels, filter_length):
        """Convolve `signal` with the per-frame filters.

        Parameters
        ----------
        signal : (L_in,) ndarray
        filter_for_frame : callable
            ``k -> (S, C, frame + 1)`` partition spectra used for frame `k`.
        """
        x = np.asarray(signal, dtype=float)
        T = self.frame
        n_out = len(x) + filter_length - 1
        n_frames = -(-n_out // T)
        n_seg = max(-(-filter_length // T), 1)
        fdl = np.zeros((n_seg, T + 1), dtype=complex)
        out = np.zeros((n_channels, (n_frames + 1) * T))
        for k in range(n_frames):
            block = x[k * T:(k + 1) * T]
            fdl = np.roll(fdl, 1, axis=0)
            fdl[0] = rfft(block, 2 * T)
            H = filter_for_frame(k)
            Y = np.einsum("sf,scf->cf", fdl, H)
            out[:, k * T:(k + 2) * T] += irfft(Y, 2 * T, axis=-1)
        return out[:, :n_out]


def stream_convolve(signal, trajectory, fine, frame=FRAME_SIZE, fractional=True,
                    correct=True):
    """Render `signal` along `trajectory` through the fine grid.

    The ARIR is re-interpolated at the pose of every frame start; frames
    beyond the trajectory hold its last pose.

    Returns
    -------
    (C, len(signal) + T - 1) ndarray
    """
    conv = PartitionedConvolver(frame)
    fs = fine.sample_rate
    bank = ThirdOctaveBank(fs) if correct else None
    cache = {}

    def spectra(k):
        pose = trajectory.pose_at(k * frame / fs)
        key = (tuple(np.round(pose.position, 9)), tuple(np.round(pose.yaw_pitch_roll, 9)))
        if key not in cache:
            if len(cache) > 4:
                cache.pop(next(iter(cache)))
            d = fine_interpolate(fine, pose, fractional, correct, bank).channels
            cache[key] = conv.partition(d)
        return cache[key]

    return conv.run(signal, spectra, fine.channels.shape[1], fine.n_samples)


def convolve_static(signal, filt, frame=FRAME_SIZE):
    """Partitioned convolution of `signal` with one fixed ``(C, L)`` filter."""
    conv = PartitionedConvolver(frame)
    filt = np.atleast_2d(filt)
    H = conv.partition(filt)
    return conv.run(signal, lambda k: H, filt.shape[0], filt.shape[1])
