"""Seeded benchmark runs and their CSV exports.

A bench spec is a TOML (or JSON) file::

    seeds = 10                    # or an explicit list, e.g. [0, 4, 7]
    methods = ["clap", "ransac"]

    [clap]                        # keys as in a pipeline config file
    rounds = 5

    [ransac]
    iterations = 1000

    [[scene]]
    id = "synthetic-60"
    kind = "matches2d"            # or "scene3d" / "file"
    outlier_fraction = 0.6
    noise_sigma = 1.0

    [[scene]]
    id = "pair-13"
    kind = "file"
    matches = "pair13.json"       # relative to the spec file
    has_gt = false

Every (scene, method, seed) cell yields one row of ``records.csv``; errors
are caught and recorded. Wall-clock runtimes go to ``timing.csv`` so the
other exports stay byte-identical between runs.
"""
from __future__ import annotations

import csv
import io
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import load_config, localize_config, ransac_config, stitch_config
from .errors import DegenerateHomography
from .lie import H33, Homography, gl3_log_batch, inv3, normalize_homography_array
from .localize import localize3d
from .metrics import lie_log_distance
from .ransac import landmark_residuals, ransac_homography, ransac_pose, symmetric_reprojection_error
from .solvers import Matches
from .stitch import clap_homography
from .synth import SynthMatchParams, SynthSceneParams, synth_matches_2d, synth_scene_3d

METHODS = ("clap", "ransac")
LINEAR_BINS = 50
LOG_BINS = 50
LOG_EPS = 1e-8
SCENE_KINDS = ("matches2d", "scene3d", "file")


def lie_distance_to_gt(H, gt_H) -> float:
    """``|log(gt^-1 H)|_F`` after scaling both so that ``H33 = 1``.

    Returns ``inf`` when the relative transform has no real principal
    logarithm. Raises :class:`DegenerateHomography` if either ``H33`` is ~0.
    """
    A = np.stack([np.asarray(getattr(H, "H", H), float), np.asarray(getattr(gt_H, "H", gt_H), float)])
    An, ok = normalize_homography_array(A, H33)
    if not ok.all():
        raise DegenerateHomography("H33 vanishes; cannot normalize")
    L, ok = gl3_log_batch((inv3(An[1]) @ An[0])[None])
    return float(np.linalg.norm(L[0])) if ok[0] else math.inf


@dataclass
class EvalRecord:
    method: str
    scene_id: str
    seed: int
    status: str = "ok"
    lie_distance_to_gt: float | None = None
    sre_mean: float = math.nan
    inlier_ratio: float = math.nan
    runtime_ms: float = 0.0
    error: str = ""
    sre_samples: list = field(default_factory=list, repr=False)


# ---------------------------------------------------------------------------
# spec handling
# ---------------------------------------------------------------------------

@dataclass
class BenchSpec:
    scenes: list[dict]
    methods: list[str]
    seeds: list[int]
    method_config: dict
    base_dir: Path

    @classmethod
    def load(cls, path) -> "BenchSpec":
        d = load_config(path)
        return cls.from_dict(d, Path(path).resolve().parent)

    @classmethod
    def from_dict(cls, d: dict, base_dir=".") -> "BenchSpec":
        seeds = d.get("seeds", 10)
        seeds = list(range(seeds)) if isinstance(seeds, int) else [int(s) for s in seeds]
        methods = list(d.get("methods", METHODS))
        for m in methods:
            if m not in METHODS:
                raise ValueError(f"unknown method {m!r}")
        scenes = list(d.get("scene", d.get("scenes", [])))
        if not scenes:
            raise ValueError("bench spec lists no scenes")
        ids = set()
        for k, sc in enumerate(scenes):
            sc.setdefault("id", f"scene{k:02d}")
            sc.setdefault("kind", "matches2d")
            if sc["kind"] not in SCENE_KINDS:
                raise ValueError(f"scene {sc['id']}: unknown kind {sc['kind']!r}")
            if sc["id"] in ids:
                raise ValueError(f"duplicate scene id {sc['id']!r}")
            ids.add(sc["id"])
        cfg = {"clap": d.get("clap", {}), "ransac": {"ransac": d.get("ransac", {})}}
        return cls(scenes, methods, seeds, cfg, Path(base_dir))

    def cells(self):
        for sc in self.scenes:
            for m in self.methods:
                for s in self.seeds:
                    yield sc, m, s


_MATCH_KEYS = ("n_matches", "outlier_fraction", "noise_sigma", "image_size", "gt_homography_spread")
_SCENE_KEYS = ("n_landmarks", "n_observed", "outlier_fraction", "noise_sigma", "label_alphabet",
               "scene_extent")


def _params(sc: dict, keys, seed: int) -> dict:
    kw = {k: (tuple(sc[k]) if isinstance(sc[k], list) else sc[k]) for k in keys if k in sc}
    kw["seed"] = int(sc.get("seed_offset", 0)) + seed
    return kw


def _load_file_scene(sc: dict, base: Path):
    matches = Matches.from_json(json.loads((base / sc["matches"]).read_text()))
    gt = None
    if sc.get("has_gt", "gt_H" in sc):
        g = sc["gt_H"]
        if isinstance(g, str):
            g = json.loads((base / g).read_text())
        gt = Homography.from_json(g) if isinstance(g, dict) else Homography(np.asarray(g, float), H33)
    return matches, gt


# ---------------------------------------------------------------------------
# one cell
# ---------------------------------------------------------------------------

def _run_2d(matches: Matches, gt, method: str, seed: int, spec: BenchSpec, rec: EvalRecord):
    if method == "clap":
        cfg = stitch_config(spec.method_config["clap"], seed=seed)
        thr = cfg.inlier_threshold
        H, _ = clap_homography(matches, cfg)
    else:
        cfg = ransac_config(spec.method_config["ransac"], seed=seed)
        thr = cfg.inlier_threshold
        H = ransac_homography(matches, cfg).homography
    e, _ = symmetric_reprojection_error(H, matches)
    inl = e <= thr
    rec.inlier_ratio = float(inl.mean())
    rec.sre_mean = float(e[inl].mean()) if inl.any() else math.inf
    rec.sre_samples = sorted(float(v) for v in e[inl])
    if gt is not None:
        rec.lie_distance_to_gt = lie_distance_to_gt(H, gt)
        if math.isinf(rec.lie_distance_to_gt):
            rec.status = "log_domain"


def _run_3d(sc: dict, method: str, seed: int, spec: BenchSpec, rec: EvalRecord):
    scene = synth_scene_3d(SynthSceneParams(**_params(sc, _SCENE_KEYS, seed)))
    obs, lmap = scene.observations, scene.landmark_map
    thr = float(sc.get("inlier_threshold", 0.1))
    if method == "clap":
        pose = localize3d(obs, lmap, localize_config(spec.method_config["clap"], seed=seed)).pose
    else:
        rc = ransac_config(spec.method_config["ransac"], seed=seed)
        rc.inlier_threshold = thr  # scene units, not the 2D pixel threshold
        pose = ransac_pose(obs, lmap, rc).pose
    res, _ = landmark_residuals(pose.R[None], pose.t[None], obs.positions, obs.point_labels,
                                lmap.positions, lmap.point_labels)
    inl = res[0] <= thr
    rec.inlier_ratio = float(inl.mean())
    rec.sre_mean = float(res[0][inl].mean()) if inl.any() else math.inf
    rec.sre_samples = sorted(float(v) for v in res[0][inl])
    rec.lie_distance_to_gt = lie_log_distance(pose, scene.gt_pose)


def run_cell(sc: dict, method: str, seed: int, spec: BenchSpec) -> EvalRecord:
    rec = EvalRecord(method, sc["id"], seed)
    t0 = time.perf_counter()
    try:
        kind = sc["kind"]
        if kind == "scene3d":
            _run_3d(sc, method, seed, spec, rec)
        else:
            if kind == "matches2d":
                ms = synth_matches_2d(SynthMatchParams(**_params(sc, _MATCH_KEYS, seed)))
                matches, gt = ms.matches, ms.gt_H
            else:
                matches, gt = _load_file_scene(sc, spec.base_dir)
            _run_2d(matches, gt, method, seed, spec, rec)
    except Exception as exc:  # noqa: BLE001 - a failing cell must not stop the run
        rec.status = "failed"
        rec.error = f"{type(exc).__name__}: {exc}".replace("\n", " ")
        rec.lie_distance_to_gt = None if sc.get("kind") == "file" and not sc.get("has_gt") else math.inf
        rec.sre_samples = []
    rec.runtime_ms = 1000.0 * (time.perf_counter() - t0)
    return rec


def run_bench(spec: BenchSpec, workers: int = 1) -> list[EvalRecord]:
    """Run every cell; rows come back in spec order whatever ``workers`` is."""
    cells = list(spec.cells())
    if workers <= 1:
        return [run_cell(sc, m, s, spec) for sc, m, s in cells]
    with ThreadPoolExecutor(max_workers=workers) as ex:
        futures = [ex.submit(run_cell, sc, m, s, spec) for sc, m, s in cells]
        return [f.result() for f in futures]


# ---------------------------------------------------------------------------
# exports
# ---------------------------------------------------------------------------

def fmt(v) -> str:
    """Deterministic text for a CSV cell."""
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return f"{v:.12g}"


def _csv(rows, header) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([fmt(v) if not isinstance(v, str) else v for v in r])
    return buf.getvalue()


def records_csv(records) -> str:
    header = ["method", "scene_id", "seed", "status", "lie_distance_to_gt", "sre_mean",
              "inlier_ratio", "error"]
    rows = [[r.method, r.scene_id, r.seed, r.status, r.lie_distance_to_gt, r.sre_mean,
             r.inlier_ratio, r.error] for r in records]
    return _csv(rows, header)


def timing_csv(records) -> str:
    rows = [[r.method, r.scene_id, r.seed, r.runtime_ms] for r in records]
    return _csv(rows, ["method", "scene_id", "seed", "runtime_ms"])


def _distances(records, method):
    return np.array([r.lie_distance_to_gt for r in records
                     if r.method == method and r.lie_distance_to_gt is not None], dtype=float)


def histogram_tables(records, methods) -> tuple[str, str]:
    """Linear and log-spaced Lie-distance histograms with shared edges across methods.

    Non-finite distances (failures, log-domain misses) are counted in a
    trailing row whose edges are ``inf``.
    """
    per = {m: _distances(records, m) for m in methods}
    finite = np.concatenate([d[np.isfinite(d)] for d in per.values()] + [np.zeros(0)])
    hi = float(finite.max()) if finite.size else 1.0
    lin_edges = np.linspace(0.0, hi if hi > 0 else 1.0, LINEAR_BINS + 1)
    logs = np.log10(finite + LOG_EPS) if finite.size else np.zeros(1)
    lo_l, hi_l = float(logs.min()), float(logs.max())
    if hi_l <= lo_l:
        hi_l = lo_l + 1.0
    log_edges = np.linspace(lo_l, hi_l, LOG_BINS + 1)

    lin_rows, log_rows = [], []
    for m in methods:
        d = per[m]
        f = d[np.isfinite(d)]
        c_lin, _ = np.histogram(f, lin_edges)
        c_log, _ = np.histogram(np.log10(f + LOG_EPS), log_edges)
        for k in range(LINEAR_BINS):
            lin_rows.append([m, lin_edges[k], lin_edges[k + 1], int(c_lin[k])])
        for k in range(LOG_BINS):
            log_rows.append([m, 10 ** log_edges[k] - LOG_EPS, 10 ** log_edges[k + 1] - LOG_EPS,
                             int(c_log[k])])
        n_bad = int(np.count_nonzero(~np.isfinite(d)))
        lin_rows.append([m, math.inf, math.inf, n_bad])
        log_rows.append([m, math.inf, math.inf, n_bad])
    hdr = ["method", "bin_lo", "bin_hi", "count"]
    return _csv(lin_rows, hdr), _csv(log_rows, hdr)


def per_scene_csv(records, scenes, methods) -> str:
    rows = []
    for sc in scenes:
        for m in methods:
            rs = [r for r in records if r.scene_id == sc["id"] and r.method == m]
            ok = [r for r in rs if r.status != "failed"]
            d = np.array([r.lie_distance_to_gt for r in ok if r.lie_distance_to_gt is not None], float)
            sre = np.array([r.sre_mean for r in ok], float)
            ir = np.array([r.inlier_ratio for r in ok], float)
            rows.append([
                sc["id"], m, len(rs), len(rs) - len(ok),
                float(np.mean(d)) if d.size else None,
                float(np.median(d)) if d.size else None,
                float(np.mean(sre)) if sre.size else None,
                float(np.mean(ir)) if ir.size else None,
            ])
    hdr = ["scene_id", "method", "n", "n_failed", "mean_lie_distance", "median_lie_distance",
           "mean_sre", "mean_inlier_ratio"]
    return _csv(rows, hdr)


def sre_cdf_csv(records, methods) -> str:
    """Empirical CDF of per-match inlier SRE, pooled over each method's cells."""
    rows = []
    for m in methods:
        v = np.sort(np.concatenate([np.asarray(r.sre_samples, float) for r in records
                                    if r.method == m] + [np.zeros(0)]))
        n = len(v)
        for k, x in enumerate(v, 1):
            rows.append([m, x, k / n])
    return _csv(rows, ["method", "sre", "cdf"])


def bench(spec_file, out_dir, workers: int = 1) -> list[EvalRecord]:
    """Run the spec and write the CSV exports into ``out_dir``."""
    spec = spec_file if isinstance(spec_file, BenchSpec) else BenchSpec.load(spec_file)
    records = run_bench(spec, workers)
    write_exports(records, spec, out_dir)
    return records


def write_exports(records, spec: BenchSpec, out_dir) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    lin, log = histogram_tables(records, spec.methods)
    files = {
        "records.csv": records_csv(records),
        "hist_linear.csv": lin,
        "hist_log.csv": log,
        "per_scene.csv": per_scene_csv(records, spec.scenes, spec.methods),
        "sre_cdf.csv": sre_cdf_csv(records, spec.methods),
        "timing.csv": timing_csv(records),
    }
    for name, text in files.items():
        (out / name).write_text(text)


EXPORTS = ("records.csv", "hist_linear.csv", "hist_log.csv", "per_scene.csv", "sre_cdf.csv")
