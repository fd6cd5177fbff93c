"""Robust geometric estimation by clustering minimal-solver hypotheses.

Candidate transforms are generated from minimal subsets of the data (landmark
triplets for 3D pose, 4-point matches for homographies), clustered with a
pairwise distance on the transform group, and the center of the dense
cluster is taken as the estimate.
"""

__version__ = "0.1.0"

from .averaging import (
    AveragingConfig,
    average_homographies,
    average_poses,
    karcher_mean_se3,
    lie_mean_homography,
    lie_median_homography,
    log_euclidean_mean_se3,
    split_mean_se3,
)
from .clustering import ClusterConfig, ClusterResult, local_filter, mad_filter, medoid, pairwise_distances, trim_iterate
from .errors import *  # noqa: F401,F403
from .harness import bench, lie_distance_to_gt
from .lie import Homography, Pose, gl3_exp, gl3_log, se3_exp, se3_log, so3_exp, so3_log
from .localize import LocalizeConfig, PoseEstimate, localize3d
from .metrics import (
    homography_frobenius_distance,
    homography_lie_distance,
    lie_log_distance,
    point_set_distance,
    relative_transform_error,
)
from .ransac import RansacConfig, ransac_homography, ransac_pose, refine_homography, symmetric_reprojection_error
from .raster import composite, read_ppm, warp_image, write_ppm
from .solvers import (
    Landmark,
    LandmarkMap,
    Matches,
    dlt_homography,
    enumerate_pose_candidates,
    sample_homography_candidates,
    svd_align,
)
from .stitch import StitchConfig, clap_homography, stitch
from .synth import SynthMatchParams, SynthSceneParams, synth_matches_2d, synth_scene_3d
