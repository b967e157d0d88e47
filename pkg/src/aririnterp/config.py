"""Structured pipeline configuration with JSON round trip.

A configuration file is a JSON object with one optional object per section;
keys left out keep their defaults and keys starting with ``_`` are ignored
(they carry the descriptions written by :func:`dump_config`).
"""

import json
from dataclasses import asdict, dataclass, field, fields

from .asdm import AsdmConfig
from .core import SPEED_OF_SOUND
from .interpolation import InterpConfig
from .matching import MatchConfig
from .peaks import PeakDetectConfig


@dataclass
class GeneralConfig:
    """Settings shared by all stages."""

    speed_of_sound: float = SPEED_OF_SOUND
    sample_rate: float = 44100.0


@dataclass
class RenderConfig:
    """Fine-grid and streaming settings."""

    r_fine: float = 0.25
    frame_size: int = 1024
    late_split: float = 0.100
    fractional: bool = True
    spectral_correction: bool = True

    def __post_init__(self):
        if self.r_fine <= 0 or self.frame_size < 1:
            raise ValueError("r_fine and frame_size must be positive")


@dataclass
class PipelineConfig:
    """All pipeline settings, grouped by stage."""

    general: GeneralConfig = field(default_factory=GeneralConfig)
    peaks: PeakDetectConfig = field(default_factory=PeakDetectConfig)
    matching: MatchConfig = field(default_factory=MatchConfig)
    interpolation: InterpConfig = field(default_factory=InterpConfig)
    asdm: AsdmConfig = field(default_factory=AsdmConfig)
    render: RenderConfig = field(default_factory=RenderConfig)

    @classmethod
    def from_dict(cls, data):
        """Build from a nested mapping, rejecting unknown sections and keys."""
        if not isinstance(data, dict):
            raise ValueError("configuration must be a JSON object")
        kwargs = {}
        known = {f.name: f for f in fields(cls)}
        for name, values in data.items():
            if name.startswith("_"):
                continue
            if name not in known:
                raise ValueError(f"unknown configuration section {name!r}")
            section_cls = known[name].default_factory
            allowed = {f.name for f in fields(section_cls)}
            if not isinstance(values, dict):
                raise ValueError(f"section {name!r} must be an object")
            values = {k: v for k, v in values.items() if not k.startswith("_")}
            bad = sorted(set(values) - allowed)
            if bad:
                raise ValueError(f"unknown key(s) in section {name!r}: {', '.join(bad)}")
            kwargs[name] = section_cls(**values)
        return cls(**kwargs)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self):
        return asdict(self)


DESCRIPTIONS = {
    "general": {
        "speed_of_sound": "speed of sound in m/s",
        "sample_rate": "sample rate in Hz for simulated grids",
    },
    "peaks": {
        "prominence_db": "minimum topographic prominence of an envelope peak (dB)",
        "floor_db": "lowest peak level relative to the envelope maximum (dB)",
        "early_window": "peaks are kept up to this long after the direct sound (s)",
        "direct_db": "direct sound = earliest peak within this level of the maximum (dB)",
        "min_distance": "minimum spacing of two peaks (s)",
        "doa_window": "half width of the envelope-weighted peak DOA average (s)",
        "doa_band": "pass band of the DOA estimator (Hz), also used for residuals",
    },
    "matching": {
        "n_matches": "number of matches including the direct sound (M)",
        "dz": "height step of the triplet localizer (m)",
        "accept": "largest accepted combined matching cost",
        "alpha_decay": "time after the direct sound over which the distance-law "
                       "exponent falls from 1 to 0 (s)",
        "window_slack": "tolerance on the feasible TDOA window (samples)",
    },
    "interpolation": {
        "pre_samples": "segment start before a matched peak (samples)",
        "max_segment": "maximum peak segment length (s)",
        "fade": "segment edge fade length (samples)",
        "xcorr_range": "largest cross-correlation alignment lag (samples)",
        "residual_limit": "flight time up to which residuals are extrapolated (s)",
        "shift_window": "sliding window length L of the residual time-shift map (samples)",
        "fractional_segments": "apply sub-sample shifts to peak segments",
        "correction_avg": "averaging length of the band-energy correction (s)",
        "correction_hop": "frame hop of the band-energy correction (s)",
        "max_correction_db": "upper limit of the residual correction gain (dB)",
    },
    "asdm": {
        "target_order": "output SH order of the upmix",
        "decorrelation_start": "time after which the tail is decorrelated (s)",
        "tau": "delay step of the phase-modulation decorrelator (s)",
        "phi_hat": "modulation depth of the decorrelator (rad)",
        "q_max": "largest delay index of the decorrelator",
        "one_sided": "use only non-negative delay indices",
        "crossfade": "fade length into the decorrelated tail (s)",
        "correct_spectrum": "apply the per-order band-energy correction",
        "decorrelate": "decorrelate the late tail",
        "doa_band": "pass band of the DOA estimator (Hz)",
    },
    "render": {
        "r_fine": "fine grid spacing (m)",
        "frame_size": "streaming frame size T_s and filter update period (samples)",
        "late_split": "time after which only the nearest fine node is used (s)",
        "fractional": "fractional-delay alignment of fine nodes",
        "spectral_correction": "band-energy correction of the interpolated early part",
    },
}


def dump_config(cfg=None):
    """JSON text of `cfg` (defaults if omitted) with per-key descriptions."""
    cfg = cfg or PipelineConfig()
    data = cfg.to_dict()
    for section, values in data.items():
        values["_doc"] = DESCRIPTIONS.get(section, {})
    return json.dumps(data, indent=2)
