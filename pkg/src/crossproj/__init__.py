"""crossproj: bidirectional 2D-3D projection engine.

Voxelizes point clouds, binds voxels to pixels through perspective link
matrices with occlusion handling, moves features and semantic labels in
both directions, and fuses multi-view back-projections.  Hot kernels run
on a compiled extension when available, with a numpy fallback selected at
import time (see crossproj._kernels.backend()).
"""

from ._kernels import backend as kernel_backend
from .errors import CrossProjError, ParseError, ValidationError
from .geometry import (
    Camera,
    Intrinsics,
    Pose,
    Projection,
    compose_m,
    in_frustum,
    project,
    project_points,
    unproject,
)
from .linker import DepthMap, LinkConfig, LinkMatrix, build_link, link_stats, remap_link, render_depth
from .synth import Box, BoxScene, analytic_depth, analytic_hits, look_at_pose, sample_cloud
from .transfer import (
    FeatureMap2D,
    FeatureSet3D,
    FusionWeights,
    concat_fuse_stub,
    fuse_views,
    gather_2d_to_3d,
    paint_labels_2d_to_3d,
    paint_labels_3d_to_2d,
    scatter_3d_to_2d,
)
from .views import DEFAULT_VIEW_COUNT, View, ViewBundle, select_views_test, select_views_train
from .voxelgrid import VOID_LABEL, PointCloud, SparseVoxelGrid, coarsen, voxel_center, voxelize

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "kernel_backend",
    "CrossProjError", "ParseError", "ValidationError",
    "Camera", "Intrinsics", "Pose", "Projection",
    "compose_m", "project", "project_points", "unproject", "in_frustum",
    "PointCloud", "SparseVoxelGrid", "voxelize", "voxel_center", "coarsen", "VOID_LABEL",
    "DepthMap", "LinkMatrix", "LinkConfig", "build_link", "render_depth", "remap_link", "link_stats",
    "FeatureMap2D", "FeatureSet3D", "FusionWeights",
    "scatter_3d_to_2d", "gather_2d_to_3d", "fuse_views",
    "paint_labels_3d_to_2d", "paint_labels_2d_to_3d", "concat_fuse_stub",
    "View", "ViewBundle", "select_views_train", "select_views_test", "DEFAULT_VIEW_COUNT",
    "Box", "BoxScene", "sample_cloud", "analytic_depth", "analytic_hits", "look_at_pose",
]
