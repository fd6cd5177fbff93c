"""Single-shot 3D localization from labeled landmark observations."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .averaging import AveragingConfig, average_poses
from .clustering import GLOBAL, LOCAL, ClusterConfig, local_filter, trim_iterate
from .errors import AllCandidatesDegenerate, EmptyAfterFilter
from .lie import Pose
from .solvers import LandmarkMap, enumerate_pose_candidates

DEFAULT_MAX_CANDIDATES = 50_000
DEFAULT_MAX_RESIDUAL = 0.1


@dataclass
class LocalizeConfig:
    """Pipeline settings.

    ``max_residual`` discards triplet candidates whose own alignment RMS
    (scene units) exceeds it: a correct assignment of three observations is
    nearly congruent to its map triangle, while most wrong ones are not.
    ``None`` disables the gate.
    """

    cluster: ClusterConfig = field(default_factory=ClusterConfig)
    average: AveragingConfig = field(default_factory=AveragingConfig)
    max_candidates: int | None = DEFAULT_MAX_CANDIDATES
    initial_pose: Pose | None = None
    seed: int = 0
    max_residual: float | None = DEFAULT_MAX_RESIDUAL

    def __post_init__(self):
        if self.max_candidates is not None and self.max_candidates < 1:
            raise ValueError("max_candidates must be >= 1")
        if self.max_residual is not None and self.max_residual <= 0:
            raise ValueError("max_residual must be positive")
        if self.average.scheme not in ("karcher", "logeuclidean", "split", "medoid"):
            raise ValueError(f"scheme {self.average.scheme!r} does not apply to poses")


@dataclass
class PoseEstimate:
    pose: Pose
    survivor_count: int
    scheme_used: str
    mode_used: str
    flags: list[str] = field(default_factory=list)
    candidate_count: int = 0

    def to_json(self) -> dict:
        out = self.pose.to_json()
        out.update(survivors=self.survivor_count, mode=self.mode_used, flags=list(self.flags),
                   scheme=self.scheme_used)
        return out


def localize3d(observations: LandmarkMap, landmark_map: LandmarkMap,
               cfg: LocalizeConfig | None = None) -> PoseEstimate:
    """Estimate the robot pose (robot frame -> map frame).

    Candidates from every label-consistent triplet assignment are gated by
    alignment residual, optionally filtered around ``cfg.initial_pose``
    (falling back to global clustering when nothing is close), trimmed
    around the medoid and averaged with ``cfg.average.scheme``.
    """
    cfg = cfg or LocalizeConfig()
    landmark_map.validate_as_map()
    flags: list[str] = []
    cands = enumerate_pose_candidates(observations, landmark_map, cfg.max_candidates, cfg.seed,
                                      cfg.max_residual)
    if not cands and cfg.max_residual is not None:
        flags.append("residual_gate_empty")
        cands = enumerate_pose_candidates(observations, landmark_map, cfg.max_candidates, cfg.seed)
    if not cands:
        raise AllCandidatesDegenerate("no non-degenerate label-consistent triplet assignment")

    mode = GLOBAL
    ccfg = cfg.cluster
    reference = cfg.initial_pose
    if reference is None and ccfg.mode == LOCAL:
        reference = ccfg.reference
    if reference is not None:
        try:
            keep = local_filter(cands, reference, ccfg.tol_t, ccfg.tol_r, ccfg.lam)
        except EmptyAfterFilter:
            flags.append("fallback_to_global")
        else:
            cands = [cands[i] for i in sorted(keep)]
            mode = LOCAL
    elif ccfg.mode == LOCAL:
        flags.append("fallback_to_global")

    res = trim_iterate(cands, ccfg)
    survivors = [cands[i].pose for i in res.survivors]
    scheme = cfg.average.scheme
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        if scheme == "medoid":
            pose = cands[res.center_index].pose
            info = None
        else:
            pose, info = average_poses(survivors, cfg.average, ccfg.lam, full_output=True)
    if info is not None and not info.converged:
        flags.append("non_convergence")
    if not np.all(np.isfinite(pose.as_matrix())):
        raise AllCandidatesDegenerate("averaging produced a non-finite pose")
    return PoseEstimate(pose, len(survivors), scheme, mode, flags, len(cands))
