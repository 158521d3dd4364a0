"""Command line front end.

Subcommands mirror the pipeline stages so intermediate artifacts can be
inspected or swapped: lines, corners, hypotheses, evaluate, export, plus
synth (scene generation), run (full pipeline) and bench (repeated runs with
medians). All failures exit nonzero with a stage-tagged message on stderr.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import pngio
from .corners import CornerCandidate, extract_corner_candidates
from .filtering import label_normals
from .hypotheses import HypothesisConfig, generate_hypotheses
from .lines import (
    ThresholdConfig,
    VanishingBasis,
    classify_lines,
    cluster_edge_groups,
    detect_edges,
    estimate_vanishing_basis,
    fit_groups,
)
from .pipeline import (
    StageError,
    bench,
    config_for_scene,
    run_pipeline,
    write_bench_csv,
    write_scene_dir,
)
from .evaluation import render_labels, select_best
from .synthetic import generate_scene, random_scene_spec


def _threshold_config(args) -> ThresholdConfig:
    return ThresholdConfig(seed=args.seed)


def _cmd_lines(args) -> int:
    pano = pngio.read_pano_png(args.pano)
    cfg = _threshold_config(args)
    edges = detect_edges(pano, cfg)
    groups = cluster_edge_groups(edges, cfg)
    lines = [l for l in fit_groups(groups, cfg) if l is not None]
    basis = estimate_vanishing_basis(lines, cfg)
    lines = classify_lines(lines, basis, cfg)
    pngio.save_json(args.out, pngio.segments_to_json(lines, basis))
    print(f"{len(lines)} lines -> {args.out}")
    return 0


def _cmd_corners(args) -> int:
    lines, basis = pngio.segments_from_json(pngio.load_json(args.lines))
    if basis is None:
        raise ValueError("lines file lacks a vanishing basis")
    cands = extract_corner_candidates(lines, basis)
    payload = pngio.segments_to_json([], basis)
    payload["corners"] = [
        {
            "dir": [float(x) for x in c.dir],
            "hemisphere": c.hemisphere,
            "quadrant": c.quadrant,
            "parents": list(c.parents),
            "weight": int(c.weight),
        }
        for c in cands
    ]
    del payload["lines"]
    pngio.save_json(args.out, payload)
    print(f"{len(cands)} corner candidates -> {args.out}")
    return 0


def _load_corners(path):
    payload = pngio.load_json(path)
    _, basis = pngio.segments_from_json({"lines": [], **payload})
    cands = [
        CornerCandidate(
            dir=np.array(c["dir"]),
            hemisphere=c["hemisphere"],
            quadrant=c["quadrant"],
            parents=tuple(c["parents"]),
            weight=int(c["weight"]),
        )
        for c in payload["corners"]
    ]
    return cands, basis


def _cmd_hypotheses(args) -> int:
    cands, basis = _load_corners(args.corners)
    cfg = HypothesisConfig(n_hypotheses=args.n_hypotheses, seed=args.seed)
    hyps = generate_hypotheses(cands, basis, cfg)
    payload = {
        "hypotheses": [pngio.layout_to_json(h) for h in hyps],
        "basis": {"rot": [[float(v) for v in row] for row in basis.rot],
                  "inliers": list(basis.inliers)},
    }
    pngio.save_json(args.out, payload)
    print(f"{len(hyps)} hypotheses -> {args.out}")
    return 0


def _cmd_evaluate(args) -> int:
    payload = pngio.load_json(args.hypotheses)
    hyps = [pngio.layout_from_json(h) for h in payload["hypotheses"]]
    rot = np.array(payload["basis"]["rot"]) if "basis" in payload else None
    normal_map = pngio.read_normal_png(args.normal_map)
    basis = VanishingBasis(rot=rot, inliers=(0, 0, 0))
    reference = label_normals(normal_map, basis)
    best, score, idx = select_best(hyps, reference, rot)
    out = {
        "best": pngio.layout_to_json(best),
        "selected_index": idx,
        "eop_ref": score,
    }
    pngio.save_json(args.out, out)
    if args.render is not None:
        pngio.write_labels_png(args.render, render_labels(best, reference.shape, rot))
    print(f"selected hypothesis {idx} (eop {score:.4f}) -> {args.out}")
    return 0


def _cmd_export(args) -> int:
    payload = pngio.load_json(args.layout)
    # accept an evaluate result directly, not just a bare layout file
    layout = pngio.layout_from_json(payload.get("best", payload))
    paths = pngio.export_model(layout, args.out_dir, stem=args.stem)
    print(" ".join(str(p) for p in paths))
    return 0


def _cmd_synth(args) -> int:
    rng = np.random.default_rng(args.seed)
    spec = random_scene_spec(
        rng,
        walls=args.walls,
        clutter=args.clutter,
        line_noise_deg=args.line_noise,
        normal_flip_rate=args.flip_rate,
        dims=tuple(args.dims),
        pano_dims=tuple(args.pano_dims),
    )
    scene = generate_scene(spec)
    out = write_scene_dir(scene, args.out_dir, include_edge_map=not args.no_edge_map)
    print(f"scene ({args.walls} walls, {len(scene.clutter_segments)} clutter) -> {out}")
    return 0


def _cmd_run(args) -> int:
    cfg = config_for_scene(args.scene_dir, edge_map=not args.no_edge_map)
    cfg.output_dir = args.out_dir
    cfg = cfg.with_seed(args.seed)
    cfg.hypotheses = replace(cfg.hypotheses, n_hypotheses=args.n_hypotheses)
    best, _, entry = run_pipeline(cfg)
    gt_part = f" eop_gt={entry['eop_gt']:.4f}" if "eop_gt" in entry else ""
    print(
        f"{entry['mode']}: {entry['lines_post_filter']} lines, "
        f"{entry['corner_candidates']} corners, {entry['hypothesis_count']} hypotheses, "
        f"best #{entry['selected_index']} eop_ref={entry['eop_ref']:.4f}{gt_part} "
        f"({best.num_walls} walls)"
    )
    return 0


def _cmd_bench(args) -> int:
    dirs = [Path(d) for d in args.scenes]
    sweep = tuple(int(x) for x in args.sweep.split(",")) if args.sweep else None
    report = bench(
        dirs,
        repeats=args.repeats,
        base_seed=args.seed,
        sweep=sweep,
        edge_maps=not args.no_edge_map,
        n_hypotheses=args.n_hypotheses,
    )
    for name in report.scenes:
        info = report.per_scene[name]
        print(f"{name}: median {info['median']:.4f} mean {info['mean']:.4f} std {info['std']:.4f}")
    print(f"aggregate median {report.aggregate['median']:.4f}")
    if report.sweep:
        for n in sorted(report.sweep):
            print(f"sweep N_h={n}: median {report.sweep[n]:.4f}")
    if args.csv:
        write_bench_csv(report, args.csv)
    if args.json:
        pngio.save_json(
            args.json,
            {
                "scenes": report.scenes,
                "repeats": report.repeats,
                "per_scene": report.per_scene,
                "aggregate": report.aggregate,
                "sweep": {str(k): v for k, v in (report.sweep or {}).items()},
            },
        )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="panolayout",
        description="Room layout recovery from equirectangular panoramas.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("lines", help="detect great-circle line segments")
    p.add_argument("--pano", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_lines)

    p = sub.add_parser("corners", help="corner candidates from detected lines")
    p.add_argument("--lines", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_corners)

    p = sub.add_parser("hypotheses", help="generate layout hypotheses")
    p.add_argument("--corners", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--n-hypotheses", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_hypotheses)

    p = sub.add_parser("evaluate", help="select the best hypothesis by EOP")
    p.add_argument("--hypotheses", required=True)
    p.add_argument("--normal-map", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--render", default=None, help="optional labels PNG for the winner")
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("export", help="write layout JSON + mesh")
    p.add_argument("--layout", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--stem", default="layout")
    p.set_defaults(func=_cmd_export)

    p = sub.add_parser("synth", help="generate a synthetic scene directory")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--walls", type=int, default=4, choices=(4, 6, 8))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--clutter", type=int, default=0)
    p.add_argument("--line-noise", type=float, default=0.0)
    p.add_argument("--flip-rate", type=float, default=0.0)
    p.add_argument("--dims", type=int, nargs=2, default=(256, 512))
    p.add_argument("--pano-dims", type=int, nargs=2, default=(512, 1024))
    p.add_argument("--no-edge-map", action="store_true")
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("run", help="full pipeline on a scene directory")
    p.add_argument("--scene-dir", required=True)
    p.add_argument("--out-dir", default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n-hypotheses", type=int, default=100)
    p.add_argument("--no-edge-map", action="store_true", help="geometry-only mode")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("bench", help="repeated runs over scenes, median EOP")
    p.add_argument("--scenes", nargs="+", required=True)
    p.add_argument("--repeats", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--sweep", default=None, help="comma list of hypothesis budgets")
    p.add_argument("--csv", default=None)
    p.add_argument("--json", default=None)
    p.add_argument("--n-hypotheses", type=int, default=100)
    p.add_argument("--no-edge-map", action="store_true")
    p.set_defaults(func=_cmd_bench)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except StageError as err:
        print(f"error {err}", file=sys.stderr)
        return 1
    except Exception as err:  # noqa: BLE001  - CLI boundary
        print(f"error [{args.command}] {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
