"""Variable-perspective interpolation of Ambisonic room impulse response grids.

The package splits ARIRs of a horizontal measurement grid into matched early
peaks and residuals, extrapolates both to an arbitrary listener pose and
interpolates them with energy corrections.  A fine-grid renderer and an
image-source room simulator for validation are included.
"""

from .core import SPEED_OF_SOUND, Arir, ArirGrid, Lattice, ListenerPose, grid_weights
from .asdm import AsdmConfig, asdm_upmix
from .config import PipelineConfig
from .interpolation import InterpConfig, prepare_grid, synthesize_perspective
from .localization import LocalizationError, localize_global, localize_triplet
from .matching import MatchConfig, match_peaks
from .oracle import ShoeboxRoom, image_sources, simulate_arir, simulate_grid
from .peaks import PeakDetectConfig, analyze_peaks
from .renderer import FineGrid, Trajectory, fine_interpolate, precompute_fine_grid, stream_convolve

__all__ = [
    "SPEED_OF_SOUND", "Arir", "ArirGrid", "Lattice", "ListenerPose", "grid_weights",
    "AsdmConfig", "asdm_upmix", "PipelineConfig", "InterpConfig", "prepare_grid",
    "synthesize_perspective", "LocalizationError", "localize_global", "localize_triplet",
    "MatchConfig", "match_peaks", "ShoeboxRoom", "image_sources", "simulate_arir",
    "simulate_grid", "PeakDetectConfig", "analyze_peaks", "FineGrid", "Trajectory",
    "fine_interpolate", "precompute_fine_grid", "stream_convolve",
]
