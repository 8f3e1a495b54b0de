"""Command-line interface: segment, train-priors, eval, synth."""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .errors import InputError
from .evaluate import (
    classify_complexity,
    generate_scene,
    match_lines,
    match_polygons,
    ref_centerline,
)
from .pipeline import (
    PipelineConfig,
    export_geojson,
    export_trace_csv,
    load_config,
    load_geojson_polygons,
    load_scene_spec,
    run,
)
from .priors import (
    PriorSet,
    fit_collinearity,
    fit_shape_prior,
    load_priors,
    read_pairs_csv,
    read_shapes_csv,
    save_priors,
)
from .raster import load_raster, save_raster


def _cmd_segment(args) -> int:
    raster = load_raster(args.raster)
    priors = load_priors(args.priors)
    config = load_config(args.config) if args.config else PipelineConfig()
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.workers is not None:
        overrides["workers"] = args.workers
    if overrides:
        import dataclasses

        config = dataclasses.replace(config, **overrides)
    detections, trace = run(raster, priors, config, collect_trace=args.trace is not None)
    export_geojson(detections, args.out)
    if args.trace is not None:
        export_trace_csv(trace, args.trace)
    print(f"wrote {len(detections)} detections to {args.out}")
    return 0


def _cmd_train_priors(args) -> int:
    shapes = read_shapes_csv(args.shapes)
    pairs = read_pairs_csv(args.pairs)
    prior = fit_shape_prior(shapes)
    model = fit_collinearity(pairs)
    save_priors(PriorSet(shape=prior, collinearity=model, merge_threshold=args.merge_threshold), args.out)
    print(f"wrote priors to {args.out}")
    return 0


def _poly_report_json(report) -> dict:
    return {
        "precision": report.precision,
        "recall": report.recall,
        "mean_iou_matched": report.mean_iou_matched,
        "ref_matched": list(report.ref_matched),
        "det_matched": list(report.det_matched),
    }


def _line_report_json(report) -> dict:
    return {
        "precision": report.precision,
        "precision_simple": report.precision_simple,
        "precision_complex": report.precision_complex,
        "recall_at_cover": report.recall_at_cover,
        "coverage_curve": [[t, f] for t, f in report.coverage_curve],
        "ref_matched": list(report.ref_matched),
        "det_matched": list(report.det_matched),
        "ref_coverage": list(report.ref_coverage),
    }


def _cmd_eval(args) -> int:
    refs = [ring for ring, _ in load_geojson_polygons(args.ref)]
    dets = [ring for ring, _ in load_geojson_polygons(args.det)]
    if args.mode == "poly":
        payload = _poly_report_json(match_polygons(refs, dets))
    else:
        ref_segs = [ref_centerline(r) for r in refs]
        det_segs = [ref_centerline(d) for d in dets]
        labels = classify_complexity(refs)
        payload = _line_report_json(match_lines(ref_segs, det_segs, ref_complex=labels))
    with open(args.report, "w") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")
    print(f"wrote report to {args.report}")
    return 0


def _cmd_synth(args) -> int:
    from .geometry import decode_rect

    spec = load_scene_spec(args.spec)
    raster, truth = generate_scene(spec)
    save_raster(raster, args.out_raster)
    features = []
    for i, stem in enumerate(truth):
        ring = [[float(x), float(y)] for x, y in decode_rect(stem)]
        ring.append(ring[0])
        features.append(
            {
                "type": "Feature",
                "geometry": {"type": "Polygon", "coordinates": [ring]},
                "properties": {
                    "id": i,
                    "length_m": stem.a,
                    "width_m": stem.b,
                    "angle_deg": float(np.degrees(stem.rho)),
                },
            }
        )
    with open(args.out_truth, "w") as fh:
        json.dump({"type": "FeatureCollection", "features": features}, fh, indent=2)
        fh.write("\n")
    print(f"wrote scene to {args.out_raster} and truth to {args.out_truth}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="stemseg", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    seg = sub.add_parser("segment", help="segment a probability raster into object polygons")
    seg.add_argument("--raster", required=True, help="input PRB1 raster")
    seg.add_argument("--priors", required=True, help="priors JSON (shape prior + collinearity model)")
    seg.add_argument("--config", default=None, help="pipeline config JSON (defaults when omitted)")
    seg.add_argument("--out", required=True, help="output GeoJSON path")
    seg.add_argument("--seed", type=int, default=None)
    seg.add_argument("--workers", type=int, default=None)
    seg.add_argument("--trace", default=None, help="optional annealing trace CSV")
    seg.set_defaults(func=_cmd_segment)

    train = sub.add_parser("train-priors", help="fit the shape prior and collinearity model from CSVs")
    train.add_argument("--shapes", required=True, help="CSV with columns length_m,width_m")
    train.add_argument("--pairs", required=True, help="CSV with columns d_angle_rad,d_axis_m,label")
    train.add_argument("--out", required=True, help="output priors JSON")
    train.add_argument("--merge-threshold", type=float, default=0.5)
    train.set_defaults(func=_cmd_train_priors)

    ev = sub.add_parser("eval", help="compare detection and reference GeoJSON files")
    ev.add_argument("--ref", required=True)
    ev.add_argument("--det", required=True)
    ev.add_argument("--mode", choices=("poly", "line"), required=True)
    ev.add_argument("--report", required=True, help="output report JSON")
    ev.set_defaults(func=_cmd_eval)

    synth = sub.add_parser("synth", help="generate a synthetic scene from a spec JSON")
    synth.add_argument("--spec", required=True)
    synth.add_argument("--out-raster", required=True)
    synth.add_argument("--out-truth", required=True)
    synth.set_defaults(func=_cmd_synth)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
