"""Leave-one-out cross-validation over phantom volumes, one fold per volume.

The target engine is driven exclusively through its command-line interface
and file formats: `phantom` generates the folds, `targets` produces the
supervision volumes per mode, and `dice` / `cv-summary` score the trained
network's predictions. This module only adds the training in between.
"""

from __future__ import annotations

import argparse
import shutil
import subprocess
import sys
import time
from pathlib import Path

import numpy as np

from .io_formats import read_report, read_volume, write_label_volume
from .network import NetworkSpec
from .train import TrainSpec, predict_annotated_planes, reference_planes, train_fold

ENGINE = "scribbleseg"

TARGET_MODES = {
    "dense": ("dense-reference", False, "dense"),
    "random-walk-closing": ("random-walk", True, "dense"),
    "scribble-only": ("scribble-only", False, "scribble-masked"),
}


def _run_engine(args: list[str]) -> str:
    if shutil.which(ENGINE) is None:
        raise RuntimeError(f"the {ENGINE} command-line tool must be installed")
    result = subprocess.run(
        [ENGINE, *args], check=True, capture_output=True, text=True
    )
    return result.stdout


# per-fold size factors on the base radii: each fold is a different specimen,
# so a held-out volume's geometry is never seen during training
FOLD_RADIUS_SCALES = (0.8, 1.0, 1.15, 0.9)

# annotation regime for the fold phantoms: many point-like seeds spread over
# every region (area allocation). Spread anchor points are all the walker
# needs (boundaries come from the image), while direct training on the same
# pixels sees almost no boundary-adjacent supervision -- the asymmetry the
# supervision-mode comparison is about.
TARGET_BETA = 130.0


def prepare_folds(
    root: Path,
    n_folds: int,
    plane: int,
    nz: int,
    z_stride: int,
    strokes_per_label: int = 32,
    stroke_len: int = 1,
    bone_holes: int = 8,
    noise_sigma: float = 0.05,
    gray_means: str = "0.10,0.45,0.47,0.90",
) -> list[Path]:
    """Generate one phantom dataset per fold through the engine CLI."""
    base = np.array([6.0, 16.0, 26.0]) * plane / 64.0
    fold_dirs = []
    for seed in range(n_folds):
        scale = FOLD_RADIUS_SCALES[seed % len(FOLD_RADIUS_SCALES)]
        r = np.maximum(np.round(base * scale), [2, 6, 10])
        radii = f"{r[0]:.0f},{r[1]:.0f},{r[2]:.0f}"
        fold_dir = root / f"fold{seed}"
        _run_engine([
            "phantom", "--out", str(fold_dir), "--seed", str(seed),
            "--dims", f"{nz},{plane},{plane}", "--radii", radii,
            "--z-stride", str(z_stride),
            "--strokes-per-label", str(strokes_per_label),
            "--stroke-len", str(stroke_len),
            "--holes", str(bone_holes),
            "--noise-sigma", str(noise_sigma),
            "--means", gray_means,
        ])
        fold_dirs.append(fold_dir)
    return fold_dirs


def prepare_targets(
    fold_dirs: list[Path], mode_key: str, beta: float = TARGET_BETA
) -> list[Path]:
    engine_mode, closing, _ = TARGET_MODES[mode_key]
    target_paths = []
    for fold_dir in fold_dirs:
        out_dir = fold_dir / f"targets-{mode_key}"
        args = [
            "targets", "--mode", engine_mode,
            "--gray", str(fold_dir / "gray.vmeta"),
            "--scribbles", str(fold_dir / "scribbles.txt"),
            "--out-dir", str(out_dir),
            "--closing" if closing else "--no-closing",
            "--beta", str(beta),
        ]
        if engine_mode == "dense-reference":
            args += ["--reference", str(fold_dir / "reference.vmeta")]
        _run_engine(args)
        target_paths.append(out_dir / "target.vmeta")
    return target_paths


def run_loocv(
    root: Path,
    mode_key: str,
    net_spec: NetworkSpec = NetworkSpec(),
    train_spec: TrainSpec = TrainSpec(),
    n_folds: int = 4,
    log=print,
) -> dict[str, float]:
    """Train on n-1 folds, predict the held-out fold's annotated planes,
    score through the engine, and aggregate; returns the mean columns."""
    fold_dirs = [root / f"fold{i}" for i in range(n_folds)]
    target_paths = prepare_targets(fold_dirs, mode_key)
    grays = [read_volume(d / "gray.vmeta")[0] for d in fold_dirs]
    targets = [read_volume(p)[0] for p in target_paths]
    references = [read_volume(d / "reference.vmeta")[0] for d in fold_dirs]

    _, _, mask_mode = TARGET_MODES[mode_key]
    report_paths = []
    for held_out in range(n_folds):
        t0 = time.time()
        train_ids = [i for i in range(n_folds) if i != held_out]
        model, _ = train_fold(
            [grays[i] for i in train_ids],
            [targets[i] for i in train_ids],
            net_spec=net_spec,
            train_spec=TrainSpec(
                learning_rate=train_spec.learning_rate,
                epochs=train_spec.epochs,
                batch_size=train_spec.batch_size,
                loss_mask_mode=mask_mode,
                augment=train_spec.augment,
                class_weights=train_spec.class_weights,
                seed=train_spec.seed + held_out,
            ),
        )
        planes = reference_planes(references[held_out])
        prediction = predict_annotated_planes(
            model, grays[held_out], planes, net_spec.in_slices
        )
        pred_path = root / f"fold{held_out}" / f"prediction-{mode_key}"
        write_label_volume(prediction, pred_path)
        report_path = root / f"fold{held_out}" / f"report-{mode_key}.txt"
        _run_engine([
            "dice", "--pred", str(pred_path.with_suffix(".vmeta")),
            "--ref", str(fold_dirs[held_out] / "reference.vmeta"),
            "--out", str(report_path),
        ])
        report_paths.append(report_path)
        fold_report = read_report(report_path)
        log(
            f"[{mode_key}] fold {held_out}: total={fold_report['total']:.4f} "
            f"({time.time() - t0:.0f}s)"
        )

    summary = _run_engine(["cv-summary", *map(str, report_paths)])
    log(f"[{mode_key}] cross-validation summary:\n{summary}")
    columns = [r for r in (read_report(p) for p in report_paths)]
    return {
        key: float(np.mean([c[key] for c in columns]))
        for key in ("total", "bone", "corroded_screw", "screw")
    }


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        description="phantom LOOCV of the multi-slice network over supervision modes"
    )
    parser.add_argument("--out", default="loocv_run")
    parser.add_argument("--modes", nargs="+", default=list(TARGET_MODES),
                        choices=list(TARGET_MODES))
    parser.add_argument("--folds", type=int, default=4)
    parser.add_argument("--plane", type=int, default=64, help="in-plane size")
    parser.add_argument("--nz", type=int, default=80)
    parser.add_argument("--z-stride", type=int, default=10)
    parser.add_argument("--epochs", type=int, default=50)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)

    root = Path(args.out)
    root.mkdir(parents=True, exist_ok=True)
    prepare_folds(root, args.folds, args.plane, args.nz, args.z_stride)
    results = {}
    for mode_key in args.modes:
        results[mode_key] = run_loocv(
            root, mode_key,
            train_spec=TrainSpec(epochs=args.epochs, seed=args.seed),
            n_folds=args.folds,
        )
    print("\nmean total Dice per supervision mode:")
    for mode_key, columns in results.items():
        print(f"  {mode_key}: {columns['total']:.4f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
