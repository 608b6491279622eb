"""Command-line entry point: one binary, subcommand per pipeline stage."""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import __version__
from .errors import PotsimError

MANIFEST_SCHEMA = {
    "manifest.csv": [
        "image_path",
        "class",
        "vessel_instance",
        "view_label",
        "damaged_flag",
        "master_seed",
        "image_seed",
        "bbox_x0",
        "bbox_y0",
        "bbox_x1",
        "bbox_y1",
    ],
    "catalog.csv": ["photo_id", "vessel_id", "raw_form", "view_label", "damaged"],
    "predictions.csv": [
        "split_id",
        "photo_id",
        "vessel_id",
        "true_class",
        "predicted_class",
    ],
    "profile.csv": ["radius", "height"],
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="potsim",
        description="Synthetic pottery image generation, detection and evaluation",
    )
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument(
        "--manifest-schema",
        action="store_true",
        help="print the machine-readable file schemas and exit",
    )
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("extract-profile", help="profile polyline from a drawing")
    p.add_argument("--input", required=True, help="1-bit PNG or ASCII PBM drawing")
    p.add_argument("--scale", type=float, required=True, help="units per pixel")
    p.add_argument("--axis-column", type=int, default=None)
    p.add_argument("--smooth", type=int, default=1, help="odd moving-average window")
    p.add_argument("--out", required=True, help="output profile CSV")

    p = sub.add_parser("revolve", help="revolve a profile into an OBJ mesh")
    p.add_argument("--profile", required=True)
    p.add_argument("--segments", type=int, default=128)
    p.add_argument("--closed", action="store_true")
    p.add_argument("--out", required=True)

    p = sub.add_parser("fracture", help="apply seeded breaks to a revolved profile")
    p.add_argument("--profile", required=True)
    p.add_argument("--segments", type=int, default=128)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--plan", help="replay an existing fracture plan JSON")
    p.add_argument("--plan-out", help="write the sampled plan JSON here")
    p.add_argument("--out", required=True, help="output OBJ mesh")

    p = sub.add_parser("render", help="render one randomized image of a profile")
    p.add_argument("--profile", required=True)
    p.add_argument("--class", dest="class_label", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--config", help="randomization config JSON")
    p.add_argument("--out", required=True, help="output PNG")

    p = sub.add_parser("generate", help="generate a full synthetic dataset")
    p.add_argument("--config", help="randomization config JSON")
    p.add_argument("--per-class", type=int, default=None)
    p.add_argument("--profiles", help="directory of <class>.csv profiles")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--jobs", type=int, default=1)

    p = sub.add_parser("detect", help="locate and crop pots in a directory of images")
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("split", help="generate the 20 train/val/test partitions")
    p.add_argument("--catalog", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True, help="splits JSON")
    p.add_argument("--experiment-config", help="also write trainer config JSON here")

    p = sub.add_parser("evaluate", help="prior-weighted evaluation of predictions")
    p.add_argument("--predictions", required=True)
    p.add_argument("--catalog", help="needed for the MoL prior and subgroup tables")
    p.add_argument("--prior", choices=["uniform", "mol", "both"], default="uniform")
    p.add_argument("--bootstrap-seed", type=int, default=0)
    p.add_argument("--out", help="write the full report JSON here")

    p = sub.add_parser("bound", help="minimum training-set size from the risk bound")
    p.add_argument("--h", type=float, required=True, help="VC dimension")
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--gap", type=float, required=True)

    return parser


def _cmd_extract_profile(args):
    from .profile import extract_profile, load_bitmap

    bitmap = load_bitmap(args.input)
    curve = extract_profile(
        bitmap, args.scale, axis_column=args.axis_column, smooth_window=args.smooth
    )
    curve.save_csv(args.out)
    print(f"wrote {len(curve.points)} points to {args.out}")


def _cmd_revolve(args):
    from .mesh import export_obj, revolve
    from .profile import ProfileCurve

    curve = ProfileCurve.load_csv(args.profile, closed=args.closed)
    mesh = revolve(curve, segments=args.segments)
    export_obj(mesh, args.out)
    print(f"wrote {len(mesh.vertices)} vertices, {len(mesh.triangles)} triangles")


def _cmd_fracture(args):
    from .fracture import FracturePlan, FractureRanges, apply_plan, sample_fracture_plan
    from .mesh import export_obj, mesh_bbox, revolve
    from .profile import ProfileCurve

    curve = ProfileCurve.load_csv(args.profile)
    mesh = revolve(curve, segments=args.segments)
    if args.plan:
        with open(args.plan) as fh:
            plan = FracturePlan.from_json(fh.read())
    else:
        plan = sample_fracture_plan(mesh_bbox(mesh), FractureRanges(), args.seed)
    apply_plan(mesh, plan)
    if args.plan_out:
        with open(args.plan_out, "w") as fh:
            fh.write(plan.to_json())
    export_obj(mesh, args.out)
    print(
        f"applied {len(plan.events)} breaks, removed "
        f"{mesh.removed.sum()}/{len(mesh.removed)} vertices"
    )


def _load_config(path, per_class=None):
    from .generate import RandomConfig

    if path:
        with open(path) as fh:
            config = RandomConfig.from_json(fh.read())
    else:
        config = RandomConfig()
    if per_class is not None:
        config.per_class = per_class
    return config


def _cmd_render(args):
    from .generate import render_one
    from .profile import ProfileCurve
    from .render import save_png

    config = _load_config(args.config)
    curve = ProfileCurve.load_csv(args.profile)
    img, meta = render_one(args.class_label, [curve], config, args.seed)
    save_png(img, args.out)
    print(json.dumps(meta))


def _cmd_generate(args):
    from .generate import bundled_profiles, generate_dataset, load_profiles

    config = _load_config(args.config, args.per_class)
    profiles = load_profiles(args.profiles) if args.profiles else bundled_profiles()
    rows = generate_dataset(profiles, config, args.seed, args.out, jobs=args.jobs)
    print(f"wrote {len(rows)} images to {args.out}")


def _cmd_detect(args):
    from .detector import detect_batch

    results = detect_batch(args.input, args.out)
    failures = sum(1 for r in results if "error" in r)
    print(f"cropped {len(results) - failures}/{len(results)} images")


def _cmd_split(args):
    from .dataset import EXPERIMENT_CONFIG, Catalog, make_splits

    catalog = Catalog.load_csv(args.catalog)
    plan = make_splits(catalog, args.seed)
    with open(args.out, "w") as fh:
        fh.write(plan.to_json())
    if args.experiment_config:
        with open(args.experiment_config, "w") as fh:
            json.dump(EXPERIMENT_CONFIG, fh, indent=2)
    print(f"wrote {len(plan.splits)} splits to {args.out}")


def _cmd_evaluate(args):
    from .dataset import Catalog
    from .metrics import evaluate, format_confusion, format_summary_table, load_predictions

    rows = load_predictions(args.predictions)
    catalog = Catalog.load_csv(args.catalog) if args.catalog else None
    priors = ("uniform", "mol") if args.prior == "both" else (args.prior,)
    report = evaluate(
        rows, catalog=catalog, priors=priors, bootstrap_seed=args.bootstrap_seed
    )
    print(format_summary_table(report))
    print()
    print(format_confusion(report))
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(report, fh, indent=2)


def _cmd_bound(args):
    from .metrics import min_train_size, vc_bound

    n, value = min_train_size(args.h, args.delta, args.gap)
    print(
        json.dumps(
            {
                "n_train": n,
                "bound_at_n": value,
                "bound_at_n_minus_1": vc_bound(n - 1, args.h, args.delta),
            }
        )
    )


_HANDLERS = {
    "extract-profile": _cmd_extract_profile,
    "revolve": _cmd_revolve,
    "fracture": _cmd_fracture,
    "render": _cmd_render,
    "generate": _cmd_generate,
    "detect": _cmd_detect,
    "split": _cmd_split,
    "evaluate": _cmd_evaluate,
    "bound": _cmd_bound,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.manifest_schema:
        print(json.dumps(MANIFEST_SCHEMA, indent=2))
        return 0
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 2
    try:
        _HANDLERS[args.command](args)
    except (PotsimError, OSError, ValueError, KeyError) as exc:
        print(
            json.dumps({"error": type(exc).__name__, "message": str(exc)}),
            file=sys.stderr,
        )
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
