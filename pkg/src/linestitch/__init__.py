"""Line-guided local image warping and stitching with a global similarity constraint."""

from .correspondences import (
    CorrespondenceSet,
    load_correspondences,
    ransac_filter_points,
    save_correspondences,
)
from .dlt import estimate_global_homography
from .mesh import GridMesh, build_mesh
from .moving_dlt import LocalWarpField, estimate_local_warp
from .pipeline import PipelineConfig, StitchResult, stitch_pair, stitch_sequence
from .similarity import apply_similarity_constraint, select_similarity
from .synth import SceneSpec, generate, render_pair

__version__ = "0.1.0"

__all__ = [
    "CorrespondenceSet",
    "GridMesh",
    "LocalWarpField",
    "PipelineConfig",
    "SceneSpec",
    "StitchResult",
    "apply_similarity_constraint",
    "build_mesh",
    "estimate_global_homography",
    "estimate_local_warp",
    "generate",
    "load_correspondences",
    "ransac_filter_points",
    "render_pair",
    "save_correspondences",
    "select_similarity",
    "stitch_pair",
    "stitch_sequence",
    "__version__",
]
