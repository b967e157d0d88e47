"""WAV storage of ARIRs and JSON grid manifests.

ARIRs are kept in memory as ACN/N3D float64 channels.  On disk they are
32-bit float WAV files in ACN order with either N3D or SN3D normalization;
a grid manifest lists the files with their capture positions.
"""

import json
import os

import numpy as np
from scipy.io import wavfile

from .core import SPEED_OF_SOUND, Arir, ArirGrid
from .sh import n3d_to_sn3d_gains, order_of_channels

SCHEMA_VERSION = 1
NORMALIZATIONS = ("N3D", "SN3D")


class GridLoadError(ValueError):
    """A manifest or one of its files cannot be loaded."""

    kind = "load-error"


def _check_norm(normalization):
    norm = normalization.upper()
    if norm not in NORMALIZATIONS:
        raise ValueError(f"unknown normalization {normalization!r}")
    return norm


def to_normalization(channels, normalization):
    """Convert N3D channels to `normalization`."""
    if _check_norm(normalization) == "N3D":
        return channels
    order = order_of_channels(channels.shape[0])
    return channels * n3d_to_sn3d_gains(order)[:, None]


def from_normalization(channels, normalization):
    """Convert channels stored with `normalization` to N3D."""
    if _check_norm(normalization) == "N3D":
        return channels
    order = order_of_channels(channels.shape[0])
    return channels / n3d_to_sn3d_gains(order)[:, None]


def write_wav(path, channels, sample_rate):
    """Write ``(C, T)`` samples as a 32-bit float WAV file."""
    data = np.ascontiguousarray(np.atleast_2d(channels).T, dtype=np.float32)
    rate = int(round(sample_rate))
    if abs(rate - sample_rate) > 1e-9:
        raise ValueError("WAV files need an integer sample rate")
    wavfile.write(path, rate, data)


def read_wav(path):
    """Read a WAV file as ``(C, T)`` float64 samples and its sample rate.

    Integer formats are scaled to ``[-1, 1)``.
    """
    rate, data = wavfile.read(path)
    if np.issubdtype(data.dtype, np.integer):
        info = np.iinfo(data.dtype)
        if info.min == 0:
            data = (data.astype(float) - (info.max + 1) / 2) / ((info.max + 1) / 2)
        else:
            data = data.astype(float) / -float(info.min)
    data = np.asarray(data, dtype=float)
    if data.ndim == 1:
        data = data[:, None]
    return data.T.copy(), float(rate)


def store_arir(arir, path, normalization="N3D"):
    """Write an ARIR as ACN WAV with the requested normalization."""
    write_wav(path, to_normalization(arir.channels, normalization), arir.sample_rate)


def load_arir(path, order=None, normalization="N3D", position=(0.0, 0.0, 0.0)):
    """Read an ACN WAV file into an N3D :class:`Arir`.

    Raises
    ------
    GridLoadError
        If the channel count does not match `order`.
    """
    if not os.path.exists(path):
        raise GridLoadError(f"missing ARIR file {path}")
    chans, rate = read_wav(path)
    n_ch = chans.shape[0]
    if order is not None and n_ch != (order + 1) ** 2:
        raise GridLoadError(f"{path}: {n_ch} channels do not match order {order} "
                            f"({(order + 1) ** 2} channels expected)")
    try:
        order_of_channels(n_ch)
    except ValueError as err:
        raise GridLoadError(f"{path}: {err}") from None
    return Arir(from_normalization(chans, normalization), rate, position)


def load_grid(manifest_path):
    """Load the ARIR grid described by a JSON manifest.

    File paths in the manifest are relative to the manifest's directory.
    SN3D files are converted to N3D and all ARIRs are zero-padded to the
    longest one.
    """
    if not os.path.exists(manifest_path):
        raise GridLoadError(f"manifest not found: {manifest_path}")
    try:
        with open(manifest_path) as fh:
            man = json.load(fh)
    except json.JSONDecodeError as err:
        raise GridLoadError(f"{manifest_path}: invalid JSON ({err})") from None
    for key in ("sample_rate", "order", "spacing", "entries"):
        if key not in man:
            raise GridLoadError(f"{manifest_path}: missing field {key!r}")
    if man.get("channel_order", "ACN").upper() != "ACN":
        raise GridLoadError("only ACN channel order is supported")
    norm = man.get("normalization", "N3D")
    if str(norm).upper() not in NORMALIZATIONS:
        raise GridLoadError(f"unknown normalization {norm!r}")
    entries = man["entries"]
    if len(entries) < 3:
        raise GridLoadError("a grid needs at least three entries")
    base = os.path.dirname(os.path.abspath(manifest_path))
    arirs = []
    for k, e in enumerate(entries):
        path = os.path.join(base, e["wav_path"])
        if not os.path.exists(path):
            raise GridLoadError(f"entry {k}: missing file {e['wav_path']}")
        a = load_arir(path, int(man["order"]), norm, e["position"])
        if a.sample_rate != float(man["sample_rate"]):
            raise GridLoadError(f"entry {k}: sample rate {a.sample_rate:g} differs "
                                f"from manifest {man['sample_rate']}")
        arirs.append(a)
    n = max(a.n_samples for a in arirs)
    arirs = [a.padded(n) for a in arirs]
    src = man.get("source_position")
    try:
        return ArirGrid(arirs, float(man["spacing"]),
                        float(man.get("speed_of_sound", SPEED_OF_SOUND)),
                        None if src is None else np.asarray(src, dtype=float),
                        man.get("system_delay"))
    except ValueError as err:
        raise GridLoadError(f"{manifest_path}: {err}") from None


def save_grid(grid, directory, normalization="N3D", prefix="arir"):
    """Write a grid as WAV files plus ``manifest.json``; returns the manifest path."""
    os.makedirs(directory, exist_ok=True)
    entries = []
    for k, a in enumerate(grid.arirs):
        name = f"{prefix}_{k:03d}.wav"
        store_arir(a, os.path.join(directory, name), normalization)
        entries.append({"wav_path": name, "position": a.position.tolist()})
    man = {"schema_version": SCHEMA_VERSION, "sample_rate": grid.sample_rate,
           "order": grid.order, "normalization": _check_norm(normalization),
           "channel_order": "ACN", "spacing": grid.spacing,
           "speed_of_sound": grid.speed_of_sound, "entries": entries}
    if grid.source_position is not None:
        man["source_position"] = np.asarray(grid.source_position).tolist()
    if grid.system_delay is not None:
        man["system_delay"] = float(grid.system_delay)
    path = os.path.join(directory, "manifest.json")
    with open(path, "w") as fh:
        json.dump(man, fh, indent=1)
    return path
