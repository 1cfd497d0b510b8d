"""Time-of-arrival quantum random number generation toolkit.

Simulates photon arrivals through a realistic single-photon detector, turns
arrival times into bits against an external reference clock, evaluates the
closed-form quality metrics and runs an embedded randomness test battery.
"""

__version__ = "0.1.0"

from .bitstream import BitStream
from .extract import ExtractionConfig, ExtractionStats, bin_index, extract_bits
from .photonsim import (DetectorModel, SourceModel, TimestampStream, apply_detector, bin_occupancy_oracle,
                        generate_arrivals)
from .postproc import ShuffleConfig, transpose_shuffle

__all__ = [
    "BitStream",
    "DetectorModel",
    "ExtractionConfig",
    "ExtractionStats",
    "ShuffleConfig",
    "SourceModel",
    "TimestampStream",
    "apply_detector",
    "bin_index",
    "bin_occupancy_oracle",
    "extract_bits",
    "generate_arrivals",
    "transpose_shuffle",
]
