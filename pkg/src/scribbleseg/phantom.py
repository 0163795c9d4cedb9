"""Synthetic screw-in-bone test volumes with ground truth, plus scribble synthesis.

The phantom is a stack of concentric axial cylinders (screw inside corrosion
layer inside bone, background outside) with per-class gray means, additive
Gaussian noise, and optional background-valued "holes" in the bone gray
texture. Hole disks are centered just inside the outer bone radius so they
breach the boundary: they form background-gray channels into the annulus that
seeded propagation genuinely mislabels and closing genuinely repairs. The
labels are untouched by holes and noise, so the label geometry depends only
on the radii.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .volumes import (
    BACKGROUND,
    BONE,
    CORRODED_SCREW,
    SCREW,
    VALID_LABELS,
    GrayVolume,
    LabelVolume,
    ScribbleSet,
)

_NEIGHBOR_STEPS = ((-1, 0), (1, 0), (0, -1), (0, 1))

STROKE_ALLOCATIONS = ("per-label", "area")


@dataclass(frozen=True)
class PhantomSpec:
    dims: tuple[int, int, int] = (40, 128, 128)
    r_screw: float = 8.0
    r_corrosion: float = 30.0
    r_bone: float = 48.0
    # gray means indexed by label id: background, bone, corroded screw, screw.
    # bone/corroded contrast is deliberately small (hard to tell apart by value).
    gray_means: tuple[float, float, float, float] = (0.10, 0.45, 0.55, 0.90)
    noise_sigma: float = 0.05
    bone_hole_count: int = 5
    hole_radius: float = 2.0
    rng_seed: int = 0

    def __post_init__(self):
        nz, ny, nx = self.dims
        if min(nz, ny, nx) < 1:
            raise ValueError("all dims must be positive")
        if not 0 < self.r_screw < self.r_corrosion < self.r_bone <= min(ny, nx) / 2:
            raise ValueError(
                "radii must satisfy 0 < r_screw < r_corrosion < r_bone <= min(ny,nx)/2"
            )
        if len(self.gray_means) != 4 or any(not 0 <= m <= 1 for m in self.gray_means):
            raise ValueError("gray_means must be four values in [0, 1]")
        if len(set(self.gray_means)) != 4:
            raise ValueError("gray_means must be pairwise distinct")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be nonnegative")
        if self.bone_hole_count < 0:
            raise ValueError("bone_hole_count must be nonnegative")
        if self.hole_radius <= 0:
            raise ValueError("hole_radius must be positive")


def generate_phantom(spec: PhantomSpec) -> tuple[GrayVolume, LabelVolume]:
    """Deterministic phantom volume pair for a given spec (seed fixes noise and
    hole placement; the label geometry never depends on the seed)."""
    nz, ny, nx = spec.dims
    cy = (ny - 1) / 2.0
    cx = (nx - 1) / 2.0
    yy, xx = np.mgrid[0:ny, 0:nx]
    radius = np.hypot(yy - cy, xx - cx)

    label_plane = np.full((ny, nx), BACKGROUND, dtype=np.uint8)
    label_plane[radius < spec.r_bone] = BONE
    label_plane[radius < spec.r_corrosion] = CORRODED_SCREW
    label_plane[radius < spec.r_screw] = SCREW
    labels = np.broadcast_to(label_plane, (nz, ny, nx)).copy()

    means = np.asarray(spec.gray_means, dtype=np.float64)
    gray_plane = means[label_plane]

    rng = np.random.default_rng(spec.rng_seed)
    hole_center_radius = spec.r_bone - spec.hole_radius / 2.0
    for _ in range(spec.bone_hole_count):
        theta = rng.uniform(0.0, 2.0 * np.pi)
        hy = cy + hole_center_radius * np.sin(theta)
        hx = cx + hole_center_radius * np.cos(theta)
        hole = np.hypot(yy - hy, xx - hx) <= spec.hole_radius
        gray_plane = np.where(hole, means[BACKGROUND], gray_plane)

    gray = np.broadcast_to(gray_plane, (nz, ny, nx)).astype(np.float64).copy()
    if spec.noise_sigma > 0:
        gray += rng.normal(0.0, spec.noise_sigma, size=gray.shape)
    gray = np.clip(gray, 0.0, 1.0)

    return GrayVolume.from_array(gray), LabelVolume.from_array(labels)


def _spread_starts(coords: np.ndarray, count: int, rng) -> list[tuple[int, int]]:
    """Farthest-point sampling of stroke start pixels: the first start is
    uniform random, each next one maximizes the distance to all previous.
    Spreads strokes over the whole region instead of letting them clump."""
    pts = coords.astype(np.float64)
    first = int(rng.integers(len(pts)))
    chosen = [first]
    d2 = ((pts - pts[first]) ** 2).sum(axis=1)
    while len(chosen) < count:
        nxt = int(np.argmax(d2))
        chosen.append(nxt)
        d2 = np.minimum(d2, ((pts - pts[nxt]) ** 2).sum(axis=1))
    return [tuple(int(v) for v in coords[i]) for i in chosen]


def _random_stroke(region: np.ndarray, start: tuple[int, int], length: int, rng) -> list:
    """4-connected random walk confined to `region`, preferring unvisited pixels;
    returns up to `length` unique pixel coordinates."""
    ny, nx = region.shape
    visited = {start}
    path = [start]
    y, x = start
    steps = 0
    while len(visited) < length and steps < 4 * length:
        steps += 1
        candidates = []
        for dy, dx in _NEIGHBOR_STEPS:
            py, px = y + dy, x + dx
            if 0 <= py < ny and 0 <= px < nx and region[py, px]:
                candidates.append((py, px))
        if not candidates:
            break
        fresh = [c for c in candidates if c not in visited]
        pool = fresh if fresh else candidates
        y, x = pool[rng.integers(len(pool))]
        if (y, x) not in visited:
            visited.add((y, x))
            path.append((y, x))
    return path


def generate_scribbles(
    labels: LabelVolume,
    z_stride: int = 10,
    strokes_per_label: int = 14,
    stroke_len: int = 10,
    rng_seed: int = 0,
    allocation: str = "per-label",
) -> ScribbleSet:
    """Synthesize ground-truth-consistent scribbles on every z_stride-th plane.

    For each label present on an annotated plane, strokes_per_label random
    4-connected walks of up to stroke_len pixels are drawn inside that label's
    region (farthest-point-spread start pixels); every record carries the true
    label at its coordinate. A label absent from a plane is skipped with a
    warning. Deterministic per rng_seed.

    allocation="area" redistributes the plane's total stroke budget
    (strokes_per_label x labels present) proportionally to region areas, at
    least one stroke each. Equal per-label counts over-seed small structures
    relative to large ones, which biases the walker contest at low-contrast
    boundaries; area allocation keeps the seed spacing comparable everywhere.
    """
    if z_stride < 1:
        raise ValueError("z_stride must be >= 1")
    if strokes_per_label < 1 or stroke_len < 1:
        raise ValueError("strokes_per_label and stroke_len must be positive")
    if allocation not in STROKE_ALLOCATIONS:
        raise ValueError(f"allocation must be one of {STROKE_ALLOCATIONS}")
    nz = labels.meta.dims[0]
    rng = np.random.default_rng(rng_seed)
    records = []
    for z in range(0, nz, z_stride):
        plane = labels.data[z]
        regions = {}
        for label in VALID_LABELS:
            coords = np.argwhere(plane == label)
            if coords.size == 0:
                warnings.warn(
                    f"label {label} absent from plane {z}; skipping its scribbles",
                    stacklevel=2,
                )
            else:
                regions[label] = coords
        if not regions:
            continue
        total_area = sum(len(c) for c in regions.values())
        budget = strokes_per_label * len(regions)
        for label, coords in regions.items():
            if allocation == "area":
                count = max(1, round(budget * len(coords) / total_area))
            else:
                count = strokes_per_label
            region = plane == label
            for start in _spread_starts(coords, count, rng):
                for y, x in _random_stroke(region, start, stroke_len, rng):
                    records.append((z, int(y), int(x), label))
    return ScribbleSet.from_records(records)
