"""Command-line interface: phantom / propagate / close / targets / dice /
cv-summary / export-slice."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import pipeline as pl
from .morphology import StructuringElement, close_bone_label
from .phantom import PhantomSpec, generate_phantom, generate_scribbles
from .volumes import (
    UNLABELED,
    export_slice_image,
    extract_slice,
    load_volume,
    load_gray_volume,
    load_scribbles,
    mask_labels_to_planes,
    normalize_intensities,
    save_scribbles,
    save_volume,
    GrayVolume,
    LabelVolume,
)
from .walker import RandomWalkerConfig, propagate_annotated_slices


def _add_walker_flags(parser):
    parser.add_argument("--beta", type=float, default=None, help="edge contrast parameter")
    parser.add_argument("--weight-floor", type=float, default=None)
    parser.add_argument("--tol", type=float, default=None, help="CG relative residual tolerance")
    parser.add_argument("--max-iters", type=int, default=None)


def _walker_config(args) -> RandomWalkerConfig:
    kwargs = {}
    if args.beta is not None:
        kwargs["beta"] = args.beta
    if args.weight_floor is not None:
        kwargs["weight_floor"] = args.weight_floor
    if args.tol is not None:
        kwargs["solver_tol"] = args.tol
    if args.max_iters is not None:
        kwargs["max_iters"] = args.max_iters
    return RandomWalkerConfig(**kwargs)


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(v) for v in text.split(","))


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.split(","))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="scribbleseg",
        description=(
            "Turn sparse scribbles on tomography volumes into dense per-slice "
            "training targets (seeded random-walker propagation + binary closing) "
            "and evaluate them with per-label Dice."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("phantom", help="generate a synthetic screw-in-bone volume + scribbles")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--dims", type=_ints, default=None, metavar="NZ,NY,NX")
    p.add_argument("--radii", type=_floats, default=None, metavar="RS,RC,RB")
    p.add_argument("--means", type=_floats, default=None, metavar="BG,BONE,CORR,SCREW")
    p.add_argument("--noise-sigma", type=float, default=None)
    p.add_argument("--holes", type=int, default=None, help="bone gray-texture hole count")
    p.add_argument("--hole-radius", type=float, default=None)
    p.add_argument("--seed", type=int, default=0, help="rng seed for noise/holes/scribbles")
    p.add_argument("--z-stride", type=int, default=10)
    p.add_argument("--strokes-per-label", type=int, default=14)
    p.add_argument("--stroke-len", type=int, default=10)
    p.add_argument(
        "--allocation",
        choices=("per-label", "area"),
        default="area",
        help="stroke budget split: equal per label, or proportional to region area",
    )

    p = sub.add_parser("propagate", help="random-walker propagation of scribbles (no closing)")
    p.add_argument("--gray", required=True)
    p.add_argument("--scribbles", required=True)
    p.add_argument("--out", required=True, help="output volume base path")
    _add_walker_flags(p)

    p = sub.add_parser("close", help="bone-mask closing on every annotated plane")
    p.add_argument("--labels", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--shape", choices=("disk", "square"), default="disk")
    p.add_argument("--radius", type=int, default=2)

    p = sub.add_parser("targets", help="full target generation for one mode")
    p.add_argument("--config", default=None, help="key=value config file")
    p.add_argument("--mode", choices=pl.MODES, default=None)
    p.add_argument("--gray", default=None)
    p.add_argument("--scribbles", default=None)
    p.add_argument("--reference", default=None)
    p.add_argument("--out-dir", default=None)
    closing = p.add_mutually_exclusive_group()
    closing.add_argument("--closing", dest="closing", action="store_true", default=None)
    closing.add_argument("--no-closing", dest="closing", action="store_false")
    p.add_argument("--closing-shape", choices=("disk", "square"), default=None)
    p.add_argument("--closing-radius", type=int, default=None)
    _add_walker_flags(p)

    p = sub.add_parser("dice", help="per-label Dice report of prediction vs reference")
    p.add_argument("--pred", required=True)
    p.add_argument("--ref", required=True)
    p.add_argument("--out", default=None, help="report file (stdout if omitted)")

    p = sub.add_parser("cv-summary", help="aggregate fold reports into mean ± std")
    p.add_argument("reports", nargs="+")
    p.add_argument("--out", default=None)

    p = sub.add_parser("export-slice", help="write one plane as PGM (gray) or PPM (labels)")
    p.add_argument("--volume", required=True)
    p.add_argument("--z", type=int, required=True)
    p.add_argument("--out", required=True)

    return parser


def _cmd_phantom(args) -> int:
    kwargs = {"rng_seed": args.seed}
    if args.dims is not None:
        kwargs["dims"] = args.dims
    if args.radii is not None:
        kwargs["r_screw"], kwargs["r_corrosion"], kwargs["r_bone"] = args.radii
    if args.means is not None:
        kwargs["gray_means"] = args.means
    if args.noise_sigma is not None:
        kwargs["noise_sigma"] = args.noise_sigma
    if args.holes is not None:
        kwargs["bone_hole_count"] = args.holes
    if args.hole_radius is not None:
        kwargs["hole_radius"] = args.hole_radius
    spec = PhantomSpec(**kwargs)
    gray, labels = generate_phantom(spec)
    scribbles = generate_scribbles(
        labels,
        z_stride=args.z_stride,
        strokes_per_label=args.strokes_per_label,
        stroke_len=args.stroke_len,
        rng_seed=args.seed,
        allocation=args.allocation,
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_volume(gray, out / "gray")
    save_volume(labels, out / "labels")
    # the evaluation reference mirrors the annotation pattern: ground truth
    # exists only on the scribbled planes, everything else is unlabeled
    save_volume(mask_labels_to_planes(labels, scribbles.planes()), out / "reference")
    save_scribbles(scribbles, out / "scribbles.txt")
    cov = scribbles.coverage_by_plane(spec.dims)
    print(f"phantom written to {out} ({len(scribbles)} scribble records)")
    for z in sorted(cov):
        print(f"  plane {z}: coverage {cov[z]:.4%}")
    return 0


def _cmd_propagate(args) -> int:
    gray = normalize_intensities(load_gray_volume(args.gray))
    scribbles = load_scribbles(args.scribbles)
    result = propagate_annotated_slices(gray, scribbles, _walker_config(args))
    path = save_volume(result, args.out)
    print(f"propagated labels written to {path}")
    return 0


def _cmd_close(args) -> int:
    vol = load_volume(args.labels)
    if not isinstance(vol, LabelVolume):
        raise ValueError("close expects a label volume")
    se = StructuringElement(shape=args.shape, radius=args.radius)
    out = vol.data.copy()
    for z in vol.annotated_planes():
        out[z] = close_bone_label(vol.data[z], se)
    path = save_volume(LabelVolume.from_array(out, spacing=vol.meta.spacing), args.out)
    print(f"closed labels written to {path}")
    return 0


def _cmd_targets(args) -> int:
    overrides = {
        "mode": args.mode,
        "gray_path": args.gray,
        "scribbles_path": args.scribbles,
        "reference_path": args.reference,
        "output_dir": args.out_dir,
        "beta": args.beta,
        "weight_floor": args.weight_floor,
        "solver_tol": args.tol,
        "max_iters": args.max_iters,
        "closing_enabled": args.closing,
        "closing_shape": args.closing_shape,
        "closing_radius": args.closing_radius,
    }
    if args.config is not None:
        cfg = pl.load_config(args.config, overrides)
    else:
        cfg = pl.config_from_mapping({}, overrides)
    result = pl.run_target_generation(cfg)
    print(f"target volume: {result.target_path}")
    print(f"manifest: {result.manifest_path}")
    return 0


def _cmd_dice(args) -> int:
    report = pl.run_evaluation(args.pred, args.ref, args.out)
    from .metrics import format_report

    text = format_report(report)
    if args.out is None:
        sys.stdout.write(text)
    else:
        print(f"report written to {args.out}")
    return 0


def _cmd_cv_summary(args) -> int:
    text = pl.run_cv_summary(args.reports, args.out)
    sys.stdout.write(text)
    return 0


def _cmd_export_slice(args) -> int:
    vol = load_volume(args.volume)
    plane = extract_slice(vol, args.z)
    if isinstance(vol, GrayVolume):
        plane = np.clip(plane, 0.0, 1.0).astype(np.float32)
    path = export_slice_image(plane, args.out)
    print(f"slice {args.z} written to {path}")
    return 0


_COMMANDS = {
    "phantom": _cmd_phantom,
    "propagate": _cmd_propagate,
    "close": _cmd_close,
    "targets": _cmd_targets,
    "dice": _cmd_dice,
    "cv-summary": _cmd_cv_summary,
    "export-slice": _cmd_export_slice,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return _COMMANDS[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
