"""Command-line entry point: ``clap-estimate {synth,bench,localize3d,stitch}``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import load_config, localize_config, stitch_config
from .errors import ClapError
from .harness import EXPORTS, bench
from .localize import localize3d
from .raster import read_ppm, write_ppm
from .solvers import LandmarkMap, Matches
from .stitch import stitch
from .synth import SynthMatchParams, SynthSceneParams, render_pair, synth_matches_2d, synth_scene_3d

log = logging.getLogger("clap_estimate")


def _dump(obj, path) -> None:
    text = json.dumps(obj, indent=2) + "\n"
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _read_json(path):
    return json.loads(Path(path).read_text())


def cmd_synth(args) -> int:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if args.kind == "scene3d":
        p = SynthSceneParams(n_landmarks=args.n_landmarks, n_observed=args.n_observed,
                             outlier_fraction=args.outlier_fraction, noise_sigma=args.noise_sigma,
                             seed=args.seed)
        sc = synth_scene_3d(p)
        _dump(sc.landmark_map.to_json(), out / "map.json")
        _dump(sc.observations.to_json(), out / "obs.json")
        _dump(sc.gt_pose.to_json(), out / "gt_pose.json")
        _dump({"is_inlier": sc.is_inlier.tolist()}, out / "inliers.json")
    else:
        size = tuple(args.image_size)
        p = SynthMatchParams(n_matches=args.n_matches, outlier_fraction=args.outlier_fraction,
                             noise_sigma=args.noise_sigma, image_size=size,
                             gt_homography_spread=args.spread, seed=args.seed)
        ms = synth_matches_2d(p)
        _dump(ms.matches.to_json(), out / "matches.json")
        _dump(ms.gt_H.to_json(), out / "gt_H.json")
        _dump({"is_inlier": ms.is_inlier.tolist()}, out / "inliers.json")
        if args.images:
            left, right = render_pair(ms.gt_H, size, args.seed)
            write_ppm(out / "left.ppm", left)
            write_ppm(out / "right.ppm", right)
    log.info("wrote %s synthetic data to %s", args.kind, out)
    return 0


def cmd_bench(args) -> int:
    records = bench(args.spec, args.out_dir, workers=args.workers)
    failed = sum(r.status == "failed" for r in records)
    log.info("%d cells, %d failed; wrote %s", len(records), failed, ", ".join(EXPORTS))
    return 0


def cmd_localize3d(args) -> int:
    cfg_d = load_config(args.config)
    cfg = localize_config(cfg_d, seed=args.seed)
    lmap = LandmarkMap.from_json(_read_json(args.map))
    obs = LandmarkMap.from_json(_read_json(args.obs))
    est = localize3d(obs, lmap, cfg)
    _dump(est.to_json(), args.out)
    return 0


def cmd_stitch(args) -> int:
    cfg = stitch_config(load_config(args.config), seed=args.seed)
    left = read_ppm(args.left)
    right = read_ppm(args.right)
    matches = Matches.from_json(_read_json(args.matches))
    pano, report = stitch(left, right, matches, cfg)
    write_ppm(args.out, pano)
    if args.report:
        _dump(report, args.report)
    log.info("panorama %dx%d, inlier ratio %.3f", pano.shape[1], pano.shape[0], report["inlier_ratio"])
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="clap-estimate", description=__doc__)
    ap.add_argument("--version", action="version", version=__version__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", parents=[common], help="generate a synthetic scene or match set")
    s.add_argument("kind", choices=["scene3d", "matches2d"])
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--outlier-fraction", type=float, default=0.0)
    s.add_argument("--noise-sigma", type=float, default=0.0)
    s.add_argument("--n-landmarks", type=int, default=12)
    s.add_argument("--n-observed", type=int, default=12)
    s.add_argument("--n-matches", type=int, default=200)
    s.add_argument("--image-size", type=int, nargs=2, default=[640, 480], metavar=("W", "H"))
    s.add_argument("--spread", type=float, default=0.15, help="ground-truth homography spread")
    s.add_argument("--images", action="store_true", help="also render left.ppm / right.ppm")
    s.add_argument("--out-dir", default=".")
    s.set_defaults(func=cmd_synth)

    b = sub.add_parser("bench", parents=[common], help="run a benchmark spec and export CSV tables")
    b.add_argument("--spec", required=True)
    b.add_argument("--out-dir", required=True)
    b.add_argument("--workers", type=int, default=1)
    b.set_defaults(func=cmd_bench)

    lo = sub.add_parser("localize3d", parents=[common], help="estimate a robot pose from landmark observations")
    lo.add_argument("--map", required=True)
    lo.add_argument("--obs", required=True)
    lo.add_argument("--config")
    lo.add_argument("--seed", type=int)
    lo.add_argument("--out", default="-")
    lo.set_defaults(func=cmd_localize3d)

    st = sub.add_parser("stitch", parents=[common], help="stitch two images given point matches")
    st.add_argument("--left", required=True)
    st.add_argument("--right", required=True)
    st.add_argument("--matches", required=True)
    st.add_argument("--config")
    st.add_argument("--seed", type=int)
    st.add_argument("--out", required=True)
    st.add_argument("--report")
    st.set_defaults(func=cmd_stitch)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    np.seterr(all="ignore")
    try:
        return args.func(args)
    except (ClapError, ValueError, OSError) as exc:
        print(f"clap-estimate: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
