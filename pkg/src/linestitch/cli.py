"""Command-line interface.

Subcommands: stitch, stitch-seq, metrics, synth, evaluate.
Exit codes: 0 success, 2 input error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

import numpy as np

from .correspondences import load_correspondences, save_correspondences
from .errors import InputError, NumericalError, StitchError
from .images import load_png, save_png
from .pipeline import PipelineConfig, evaluate, stitch_pair, stitch_sequence
from .synth import generate, render_pair, single_plane_scene, two_plane_scene


def _add_pipeline_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--mode", choices=["global", "local"], default="local")
    p.add_argument("--mesh-cells", type=int, default=40,
                   help="cells along the shorter image side (default 40)")
    p.add_argument("--sigma", type=float, default=8.5)
    p.add_argument("--eta", type=float, default=0.01)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--beta", type=float, default=0.001)
    p.add_argument("--gamma", type=float, default=0.01)
    p.add_argument("--delta", type=float, default=1.0)
    p.add_argument("--rho", type=float, default=0.001)
    p.add_argument("--no-similarity", "--skip-similarity", dest="similarity",
                   action="store_false", help="disable the global similarity constraint")
    p.add_argument("--skip-refine", dest="refine", action="store_false",
                   help="stop after the stage-one warp")
    p.add_argument("--collinearity-iters", type=int, default=1)
    p.add_argument("--ransac-threshold", type=float, default=3.0)
    p.add_argument("--ransac-iters", type=int, default=2000)
    p.add_argument("--filter-lines", action="store_true",
                   help="drop line matches inconsistent with the point-RANSAC model")
    p.add_argument("--line-weight", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--nearest", action="store_true", help="nearest-neighbor sampling")
    p.add_argument("--canvas-cap", type=int, default=64_000_000)
    p.add_argument("--triangles", choices=["full", "half"], default="full")
    p.add_argument("--debug", metavar="DIR", default=None,
                   help="write intermediate artifacts to DIR")


def _config_from(args) -> PipelineConfig:
    return PipelineConfig(
        mode=args.mode, mesh_cells=args.mesh_cells, sigma=args.sigma, eta=args.eta,
        alpha=args.alpha, beta=args.beta, gamma=args.gamma, delta=args.delta,
        rho=args.rho, similarity=args.similarity, refine=args.refine,
        collinearity_iters=args.collinearity_iters,
        ransac_threshold=args.ransac_threshold, ransac_iters=args.ransac_iters,
        filter_lines=args.filter_lines, line_weight=args.line_weight,
        seed=args.seed, nearest=args.nearest, canvas_cap=args.canvas_cap,
        triangles=args.triangles,
    )


def _write_report(report: dict, path: str | None) -> None:
    text = json.dumps(report, indent=2)
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    print(text)


def _dump_debug(result, out_dir: str) -> None:
    import os
    os.makedirs(out_dir, exist_ok=True)
    dbg = result.debug
    arrays = {k: v for k, v in dbg.items()
              if isinstance(v, np.ndarray)}
    np.savez(os.path.join(out_dir, "debug.npz"), **arrays)
    scalars = {k: (v if not isinstance(v, np.ndarray) else None)
               for k, v in dbg.items() if not isinstance(v, np.ndarray)}
    scalars = {k: (repr(v) if v is not None and not isinstance(v, (int, float)) else v)
               for k, v in scalars.items()}
    with open(os.path.join(out_dir, "debug.json"), "w", encoding="utf-8") as fh:
        json.dump(scalars, fh, indent=2)


def _cmd_stitch(args) -> int:
    cs = load_correspondences(args.corr)
    target = load_png(args.target)
    reference = load_png(args.reference)
    result = stitch_pair(target, reference, cs, _config_from(args),
                         want_debug=bool(args.debug))
    if args.out:
        save_png(result.image, args.out)
    if args.debug:
        _dump_debug(result, args.debug)
    _write_report(result.report, args.report)
    return 0


def _cmd_metrics(args) -> int:
    cs = load_correspondences(args.corr)
    target = load_png(args.target) if args.target else None
    reference = load_png(args.reference) if args.reference else None
    result = stitch_pair(target, reference, cs, _config_from(args))
    _write_report(result.report, args.report)
    return 0


def _cmd_stitch_seq(args) -> int:
    if len(args.corr) != len(args.images) - 1:
        raise InputError(
            f"{len(args.images)} images need {len(args.images) - 1} --corr files"
        )
    images = [load_png(p) for p in args.images]
    sets = [load_correspondences(p) for p in args.corr]
    result = stitch_sequence(images, sets, anchor=args.anchor, config=_config_from(args))
    if args.out:
        save_png(result.image, args.out)
    _write_report(result.report, args.report)
    return 0


def _cmd_synth(args) -> int:
    import os
    w, h = (int(v) for v in args.size.split("x"))
    if args.planes == 1:
        scene = single_plane_scene(args.seed, n_points=args.n_points,
                                   n_lines=args.n_lines, noise_sigma=args.noise,
                                   outlier_fraction=args.outliers, image_size=(w, h))
    else:
        from .rng import CounterStream, hash_u64
        from .synth import random_homography
        s1 = CounterStream(hash_u64(args.seed, 1))
        s2 = CounterStream(hash_u64(args.seed, 2))
        scene = two_plane_scene(args.seed, random_homography(s1), random_homography(s2),
                                n_points=args.n_points, n_lines=args.n_lines,
                                noise_sigma=args.noise, image_size=(w, h))
    cs, gt = generate(scene)
    os.makedirs(args.out_dir, exist_ok=True)
    save_correspondences(cs, os.path.join(args.out_dir, "corr.json"))
    with open(os.path.join(args.out_dir, "ground_truth.json"), "w", encoding="utf-8") as fh:
        json.dump({
            "homographies": [H.tolist() for H in gt.homographies],
            "outlier_indices": gt.outlier_indices.tolist(),
            "point_plane": gt.point_plane.tolist(),
        }, fh, indent=2)
    if args.render:
        target, reference = render_pair(scene, texture=args.texture)
        save_png(target, os.path.join(args.out_dir, "target.png"))
        save_png(reference, os.path.join(args.out_dir, "reference.png"))
    print(f"wrote scene seed={args.seed} to {args.out_dir} "
          f"(M={cs.m}, K={cs.k}{', rendered' if args.render else ''})")
    return 0


def _cmd_evaluate(args) -> int:
    result = evaluate(args.suite, seeds=args.seeds, base=_config_from(args))
    rows = result["rows"]
    a, b = result["label_a"], result["label_b"]
    print(f"suite: {result['suite']}  metric: {result['metric']}")
    print(f"{'seed':>4}  {a:>14}  {b:>14}")
    for r in rows:
        print(f"{r['seed']:>4}  {r['a']:>14.6f}  {r['b']:>14.6f}")
    print(f"{a} better on {result['a_wins']}/{len(rows)} seeds")
    if args.report:
        with open(args.report, "w", encoding="utf-8") as fh:
            json.dump(result, fh, indent=2)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="linestitch",
        description="Line-guided local image stitching with a global similarity constraint",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("stitch", help="stitch one target/reference pair")
    p.add_argument("--target", required=True)
    p.add_argument("--reference", required=True)
    p.add_argument("--corr", required=True)
    p.add_argument("--out", default=None)
    p.add_argument("--report", default=None)
    _add_pipeline_flags(p)
    p.set_defaults(func=_cmd_stitch)

    p = sub.add_parser("stitch-seq", help="stitch an image sequence")
    p.add_argument("--images", nargs="+", required=True)
    p.add_argument("--corr", nargs="+", required=True,
                   help="pairwise files: corr[k] relates images[k] (reference) to images[k+1] (target)")
    p.add_argument("--anchor", type=int, default=0)
    p.add_argument("--out", default=None)
    p.add_argument("--report", default=None)
    _add_pipeline_flags(p)
    p.set_defaults(func=_cmd_stitch_seq)

    p = sub.add_parser("metrics", help="run the pipeline and report metrics only")
    p.add_argument("--target", default=None)
    p.add_argument("--reference", default=None)
    p.add_argument("--corr", required=True)
    p.add_argument("--report", default=None)
    _add_pipeline_flags(p)
    p.set_defaults(func=_cmd_metrics)

    p = sub.add_parser("synth", help="generate a synthetic scene")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--planes", type=int, choices=[1, 2], default=1)
    p.add_argument("--n-points", type=int, default=40)
    p.add_argument("--n-lines", type=int, default=0)
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--outliers", type=float, default=0.0)
    p.add_argument("--size", default="320x240")
    p.add_argument("--render", action="store_true")
    p.add_argument("--texture", choices=["plasma", "checker"], default="plasma")
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("evaluate", help="compare configurations on synthetic suites")
    p.add_argument("--suite", required=True,
                   choices=["line-ablation", "refine-gain", "similarity-diagnostic"])
    p.add_argument("--seeds", type=int, default=20)
    p.add_argument("--report", default=None)
    _add_pipeline_flags(p)
    p.set_defaults(func=_cmd_evaluate)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except InputError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except StitchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
