"""Timing evaluation of receiver cuts in Ultimate tracking data.

Detects movement initiations, builds plays with the onset shifted earlier or
later, scores each with a weighted control field and reports how the actual
timing compares with the best shift.
"""

from .control import ControlParams, Grid, wuppcf
from .counterfactual import build_scenario, build_sweep
from .dataio import FrameTable, SmoothingConfig, preprocess, read_csv, write_csv
from .detect import DetectionConfig, MovementSequence, detect_sequences
from .timing import TimingParams, TimingReport, sweep, v_frame, v_scenario, v_timing

__version__ = "0.1.0"

__all__ = [
    "ControlParams", "DetectionConfig", "FrameTable", "Grid", "MovementSequence", "SmoothingConfig",
    "TimingParams", "TimingReport", "build_scenario", "build_sweep", "detect_sequences", "preprocess",
    "read_csv", "sweep", "v_frame", "v_scenario", "v_timing", "write_csv", "wuppcf",
]
