"""Dispatch layer selecting the numba or numpy kernel implementations.

Import the hot kernels from here; ``accel.USE_NUMBA`` (numba installed
and LINESTITCH_DISABLE_NUMBA unset) decides which module backs them.
"""

from __future__ import annotations

from . import accel
from . import kernels_numpy

if accel.USE_NUMBA:
    from . import kernels_numba as _impl
else:
    _impl = kernels_numpy

weighted_nullvec_batch = _impl.weighted_nullvec_batch
point_segment_distance_matrix = _impl.point_segment_distance_matrix
warp_mesh_bilinear = _impl.warp_mesh_bilinear
warp_cells_homography = _impl.warp_cells_homography
ncc_map = _impl.ncc_map

KERNEL_PATH = accel.active_path()
