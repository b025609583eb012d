"""Scripted attention guidance for 360-degree equirectangular video.

Parse a time-coded attention script, locate each described object through a
detect/segment backend, and render a feathered vignette that steers the
viewer toward it.
"""

from .backends import DetectionParams, Detection, Frame, detect, segment
from .pipeline import RunConfig, RunSummary, process_video, run_detection
from .script import Cue, Script, Timecode, active_cues, parse_script

__version__ = "0.1.0"

__all__ = [
    "Cue", "Script", "Timecode", "active_cues", "parse_script",
    "DetectionParams", "Detection", "Frame", "detect", "segment",
    "RunConfig", "RunSummary", "process_video", "run_detection",
    "__version__",
]
