"""Target-generation and evaluation pipeline: config, manifests, and the three
training-target modes (dense-reference / random-walk / scribble-only)."""

from __future__ import annotations

import hashlib
import warnings
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .metrics import DiceReport, dice_report, format_cv_summary, format_report, parse_report
from .morphology import StructuringElement, close_bone_label, close_mask
from .volumes import (
    BACKGROUND,
    BONE,
    UNLABELED,
    LabelVolume,
    load_gray_volume,
    load_label_volume,
    load_scribbles,
    normalize_intensities,
    save_volume,
)
from .walker import RandomWalkerConfig, propagate_slice

MODES = ("dense-reference", "random-walk", "scribble-only")

_BOOL_WORDS = {"true": True, "1": True, "yes": True, "false": False, "0": False, "no": False}


@dataclass(frozen=True)
class PipelineConfig:
    gray_path: str
    scribbles_path: str
    output_dir: str
    mode: str = "random-walk"
    reference_path: str | None = None
    beta: float = 130.0
    weight_floor: float = 1e-6
    solver_tol: float = 1e-6
    max_iters: int | None = None
    closing_enabled: bool = True
    closing_shape: str = "disk"
    closing_radius: int = 2

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        # constructing these validates the numeric ranges
        self.walker_config()
        self.structuring_element()

    def walker_config(self) -> RandomWalkerConfig:
        return RandomWalkerConfig(
            beta=self.beta,
            weight_floor=self.weight_floor,
            solver_tol=self.solver_tol,
            max_iters=self.max_iters,
        )

    def structuring_element(self) -> StructuringElement:
        return StructuringElement(shape=self.closing_shape, radius=self.closing_radius)

    def key_values(self) -> list[tuple[str, str]]:
        """Canonical key=value pairs; also the hashed provenance record."""
        return [
            ("mode", self.mode),
            ("input.gray", self.gray_path),
            ("input.scribbles", self.scribbles_path),
            ("input.reference", self.reference_path or "none"),
            ("output.dir", self.output_dir),
            ("walker.beta", repr(float(self.beta))),
            ("walker.weight_floor", repr(float(self.weight_floor))),
            ("walker.solver_tol", repr(float(self.solver_tol))),
            ("walker.max_iters", "auto" if self.max_iters is None else str(self.max_iters)),
            ("closing.enabled", "true" if self.closing_enabled else "false"),
            ("closing.shape", self.closing_shape),
            ("closing.radius", str(self.closing_radius)),
        ]

    def config_hash(self) -> str:
        block = "\n".join(f"{k}={v}" for k, v in self.key_values())
        return hashlib.sha256(block.encode("utf-8")).hexdigest()


def parse_key_values(text: str) -> dict[str, str]:
    """Parse the plain-text key=value config format ('#' starts a comment line)."""
    out = {}
    for lineno, raw_line in enumerate(text.splitlines(), 1):
        line = raw_line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected key=value, got {line!r}")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def _parse_bool(value: str) -> bool:
    try:
        return _BOOL_WORDS[value.lower()]
    except KeyError:
        raise ValueError(f"expected a boolean, got {value!r}") from None


def config_from_mapping(mapping: dict[str, str], overrides: dict | None = None) -> PipelineConfig:
    """Build a PipelineConfig from config-file keys; overrides (CLI flags) win."""
    kwargs: dict = {}
    key_map = {
        "mode": ("mode", str),
        "input.gray": ("gray_path", str),
        "input.scribbles": ("scribbles_path", str),
        "input.reference": ("reference_path", str),
        "output.dir": ("output_dir", str),
        "walker.beta": ("beta", float),
        "walker.weight_floor": ("weight_floor", float),
        "walker.solver_tol": ("solver_tol", float),
        "walker.max_iters": ("max_iters", lambda v: None if v == "auto" else int(v)),
        "closing.enabled": ("closing_enabled", _parse_bool),
        "closing.shape": ("closing_shape", str),
        "closing.radius": ("closing_radius", int),
    }
    for key, value in mapping.items():
        if key not in key_map:
            raise ValueError(f"unknown config key {key!r}")
        field, conv = key_map[key]
        kwargs[field] = conv(value)
    if kwargs.get("reference_path") in ("", "none"):
        kwargs["reference_path"] = None
    for field, value in (overrides or {}).items():
        if value is not None:
            kwargs[field] = value
    missing = [f for f in ("gray_path", "scribbles_path", "output_dir") if f not in kwargs]
    if missing:
        raise ValueError(f"config is missing required fields: {missing}")
    return PipelineConfig(**kwargs)


def load_config(path, overrides: dict | None = None) -> PipelineConfig:
    return config_from_mapping(parse_key_values(Path(path).read_text(encoding="utf-8")), overrides)


@dataclass(frozen=True)
class TargetResult:
    target: LabelVolume
    target_path: Path
    manifest_path: Path
    annotated_planes: tuple[int, ...]
    solver_iterations: dict[int, int]  # plane -> summed CG iterations
    coverage: dict[int, float]  # plane -> scribbled fraction


def run_target_generation(cfg: PipelineConfig) -> TargetResult:
    """Produce one training-target volume plus its provenance manifest.

    random-walk: per-plane scribble propagation, then (if enabled) bone-mask
    closing. scribble-only: 255 everywhere except the scribbled pixels, for
    masked-loss training. dense-reference: reference labels passed through on
    the annotated planes, optionally closed. Unannotated planes are always 255.
    """
    gray = normalize_intensities(load_gray_volume(cfg.gray_path))
    scribbles = load_scribbles(cfg.scribbles_path)
    scribbles.check_bounds(gray.meta.dims)
    dims = gray.meta.dims
    walker_cfg = cfg.walker_config()
    se = cfg.structuring_element()

    reference = None
    if cfg.mode == "dense-reference":
        if cfg.reference_path is None:
            raise ValueError("dense-reference mode requires input.reference")
        reference = load_label_volume(cfg.reference_path)
        if reference.meta.dims != dims:
            raise ValueError("reference dims do not match the gray volume")

    out = np.full(dims, UNLABELED, dtype=np.uint8)
    planes = scribbles.planes()
    if not planes:
        warnings.warn("empty scribble set: target volume is entirely unlabeled", stacklevel=2)
    iterations: dict[int, int] = {}

    if cfg.mode == "random-walk":
        for z in planes:
            plane, pmap = propagate_slice(
                gray.data[z], scribbles.for_plane(z), walker_cfg, return_potentials=True
            )
            iterations[z] = int(sum(pmap.cg_iterations))
            if cfg.closing_enabled:
                plane = close_bone_label(plane, se)
            out[z] = plane
    elif cfg.mode == "scribble-only":
        for z, y, x, label in scribbles.records:
            out[z, y, x] = label
        if cfg.closing_enabled:
            # no counterpart in the evaluated settings; when forced, closing may
            # only relabel scribbled background pixels, never unlabeled ones
            for z in planes:
                plane = out[z]
                closed = close_mask(plane == BONE, se)
                plane[closed & (plane == BACKGROUND)] = BONE
    else:  # dense-reference
        for z in planes:
            plane = reference.data[z].copy()
            if cfg.closing_enabled:
                plane = close_bone_label(plane, se)
            out[z] = plane

    target = LabelVolume.from_array(out, spacing=gray.meta.spacing)
    out_dir = Path(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    target_path = save_volume(target, out_dir / "target")

    coverage = scribbles.coverage_by_plane(dims)
    manifest_lines = [f"{k}={v}" for k, v in cfg.key_values()]
    manifest_lines.append(f"config_hash=sha256:{cfg.config_hash()}")
    manifest_lines.append(f"output.target={target_path.name}")
    manifest_lines.append("annotated_planes=" + ",".join(str(z) for z in planes))
    manifest_lines.append(f"scribble_records={len(scribbles)}")
    for z in planes:
        manifest_lines.append(f"coverage.plane{z}={coverage[z]:.6f}")
    for z in planes:
        manifest_lines.append(f"solver_iters.plane{z}={iterations.get(z, 0)}")
    manifest_path = out_dir / "target.manifest"
    manifest_path.write_text("\n".join(manifest_lines) + "\n", encoding="utf-8")

    return TargetResult(
        target=target,
        target_path=target_path,
        manifest_path=manifest_path,
        annotated_planes=tuple(planes),
        solver_iterations=iterations,
        coverage=coverage,
    )


def run_evaluation(pred_path, ref_path, report_path=None) -> DiceReport:
    """Dice report of a predicted label volume against reference labels."""
    pred = load_label_volume(pred_path)
    ref = load_label_volume(ref_path)
    report = dice_report(pred, ref)
    if report_path is not None:
        Path(report_path).write_text(format_report(report), encoding="utf-8")
    return report


def run_cv_summary(report_paths, out_path=None) -> str:
    """Aggregate per-fold report files into a mean ± std summary table."""
    paths = [Path(p) for p in report_paths]
    if not paths:
        raise ValueError("need at least one report file")
    folds = [parse_report(p.read_text(encoding="utf-8")) for p in paths]
    text = format_cv_summary(folds)
    if out_path is not None:
        Path(out_path).write_text(text, encoding="utf-8")
    return text


def derive_config(cfg: PipelineConfig, **changes) -> PipelineConfig:
    """Convenience for experiment scripts: a config with a few fields replaced."""
    return replace(cfg, **changes)
