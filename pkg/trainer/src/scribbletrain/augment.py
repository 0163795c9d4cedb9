"""Paired affine augmentation: one in-plane transform for the whole input
stack and its target plane. Images resample bilinearly; label planes use
nearest neighbor only, so label values are never interpolated."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
import torch.nn.functional as F


@dataclass(frozen=True)
class AffineRanges:
    rotation_deg: float = 15.0
    scale_low: float = 0.9
    scale_high: float = 1.1
    shear_deg: float = 5.0
    translate_frac: float = 0.05

    def __post_init__(self):
        if not 0 < self.scale_low <= self.scale_high:
            raise ValueError("scale range must be positive and ordered")
        if min(self.rotation_deg, self.shear_deg, self.translate_frac) < 0:
            raise ValueError("augmentation ranges must be nonnegative")


def sample_affine_matrix(ranges: AffineRanges, rng: np.random.Generator) -> np.ndarray:
    """Random 2x3 affine matrix in normalized [-1, 1] grid coordinates."""
    angle = np.deg2rad(rng.uniform(-ranges.rotation_deg, ranges.rotation_deg))
    shear = np.deg2rad(rng.uniform(-ranges.shear_deg, ranges.shear_deg))
    scale = rng.uniform(ranges.scale_low, ranges.scale_high)
    ty, tx = rng.uniform(-ranges.translate_frac, ranges.translate_frac, size=2) * 2.0
    cos, sin = np.cos(angle), np.sin(angle)
    rot = np.array([[cos, -sin], [sin, cos]])
    shr = np.array([[1.0, np.tan(shear)], [0.0, 1.0]])
    lin = rot @ shr / scale
    return np.array(
        [[lin[0, 0], lin[0, 1], tx], [lin[1, 0], lin[1, 1], ty]], dtype=np.float64
    )


def apply_affine_pair(stack: np.ndarray, target: np.ndarray, matrix: np.ndarray):
    """Warp a (z, H, W) gray stack and its (H, W) label plane with one matrix."""
    if stack.ndim != 3 or target.ndim != 2 or stack.shape[1:] != target.shape:
        raise ValueError("expected (z, H, W) stack and matching (H, W) target")
    theta = torch.as_tensor(matrix, dtype=torch.float32).unsqueeze(0)
    grid = F.affine_grid(theta, (1, 1, *target.shape), align_corners=False)

    planes = torch.as_tensor(stack, dtype=torch.float32).unsqueeze(1)  # (z,1,H,W)
    warped = F.grid_sample(
        planes,
        grid.expand(planes.shape[0], -1, -1, -1),
        mode="bilinear",
        padding_mode="border",
        align_corners=False,
    )
    labels = torch.as_tensor(target[None, None].astype(np.float32))
    warped_labels = F.grid_sample(
        labels, grid, mode="nearest", padding_mode="border", align_corners=False
    )
    return (
        warped.squeeze(1).numpy(),
        warped_labels.squeeze().numpy().astype(target.dtype),
    )
