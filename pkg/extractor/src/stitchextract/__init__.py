"""SIFT + LSD feature extraction frontend for the stitching pipeline."""

from .extract import (
    ExtractionConfig,
    detect_segments,
    extract_and_match,
    match_lines_guided,
    match_points,
    write_correspondences,
)
from .visualize import visualize_matches

__version__ = "0.1.0"
