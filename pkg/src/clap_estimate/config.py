"""TOML/JSON configuration files for the pipelines and the CLI.

Cluster keys may sit at the top level or in a ``[cluster]`` table::

    metric = "lielog"
    trim_fraction = 0.2
    rounds = 5
    average = "karcher"
    seed = 3

    [ransac]
    iterations = 1000
    threshold_px = 2.0
"""
from __future__ import annotations

import json
import sys
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .averaging import AveragingConfig
from .clustering import ClusterConfig
from .lie import Pose
from .localize import DEFAULT_MAX_CANDIDATES, DEFAULT_MAX_RESIDUAL, LocalizeConfig
from .ransac import RansacConfig
from .stitch import StitchConfig

CLUSTER_KEYS = ("metric", "trim_fraction", "rounds", "mad_k", "mode", "tol_t", "tol_r", "lam")
AVERAGING_KEYS = ("max_iter", "tol")
RANSAC_KEYS = ("iterations", "inlier_threshold")
RANSAC_ALIASES = {"threshold_px": "inlier_threshold"}


def load_config(path) -> dict:
    """Read a ``.toml`` or ``.json`` file into a plain dict (``None`` gives ``{}``)."""
    if path is None:
        return {}
    p = Path(path)
    if p.suffix.lower() == ".json":
        return json.loads(p.read_text())
    with open(p, "rb") as fh:
        return tomllib.load(fh)


def _pick(d: dict, keys) -> dict:
    return {k: d[k] for k in keys if k in d}


def cluster_config(d: dict, **defaults) -> ClusterConfig:
    merged = dict(defaults)
    merged.update(_pick(d, CLUSTER_KEYS))
    merged.update(_pick(d.get("cluster", {}), CLUSTER_KEYS))
    return ClusterConfig(**merged)


def ransac_config(d: dict, seed: int | None = None, **defaults) -> RansacConfig:
    merged = dict(defaults)
    table = d.get("ransac", {})
    merged.update(_pick(table, RANSAC_KEYS))
    merged.update({RANSAC_ALIASES[k]: v for k, v in table.items() if k in RANSAC_ALIASES})
    if seed is None:
        seed = d.get("seed", 0)
    return RansacConfig(seed=int(seed), **merged)


def localize_config(d: dict, seed: int | None = None) -> LocalizeConfig:
    init = d.get("initial_pose")
    avg = dict(scheme=d.get("average", "karcher"), **_pick(d, AVERAGING_KEYS))
    return LocalizeConfig(
        cluster=cluster_config(d),
        average=AveragingConfig(**avg),
        max_candidates=d.get("max_candidates", DEFAULT_MAX_CANDIDATES),
        initial_pose=Pose.from_json(init) if init is not None else None,
        seed=int(d.get("seed", 0) if seed is None else seed),
        max_residual=d.get("max_residual", DEFAULT_MAX_RESIDUAL),
    )


def stitch_config(d: dict, seed: int | None = None) -> StitchConfig:
    kw = _pick(d, ("n_candidates", "refine", "blend", "inlier_threshold", "condition"))
    center = d.get("center", d.get("average", "medoid"))
    return StitchConfig(
        cluster=cluster_config(d, metric="hlie"),
        center=center,
        seed=int(d.get("seed", 0) if seed is None else seed),
        **kw,
    )
