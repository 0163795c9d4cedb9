"""Binary morphology used to de-noise propagated label slices.

Closing (dilation then erosion) fills small background holes in the bone
mask without asymptotically growing it. dilate/erode treat out-of-bounds
pixels as unset; close_mask runs the composition on a frame padded by the
element radius so the usual algebraic properties (extensivity, idempotence,
monotonicity) hold for masks touching the image border too.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .volumes import BACKGROUND, BONE, UNLABELED


@dataclass(frozen=True)
class StructuringElement:
    """Flat symmetric structuring element: a disk or square of integer radius."""

    shape: str = "disk"
    radius: int = 2

    def __post_init__(self):
        if self.shape not in ("disk", "square"):
            raise ValueError(f"unknown structuring element shape {self.shape!r}")
        if int(self.radius) < 1:
            raise ValueError("radius must be a positive integer")

    def offsets(self) -> np.ndarray:
        """(k, 2) array of (dy, dx) offsets, symmetric about and including the origin."""
        r = int(self.radius)
        dy, dx = np.mgrid[-r : r + 1, -r : r + 1]
        if self.shape == "disk":
            keep = dy * dy + dx * dx <= r * r
        else:
            keep = np.ones_like(dy, dtype=bool)
        return np.stack([dy[keep], dx[keep]], axis=1)


def _as_mask(mask) -> np.ndarray:
    arr = np.asarray(mask)
    if arr.ndim != 2:
        raise ValueError("mask must be 2D")
    return arr.astype(bool)


def dilate(mask, se: StructuringElement) -> np.ndarray:
    """Pixel set iff any structuring-element neighbor inside the image is set."""
    m = _as_mask(mask)
    r = int(se.radius)
    padded = np.pad(m, r)
    ny, nx = m.shape
    out = np.zeros_like(m)
    for dy, dx in se.offsets():
        out |= padded[r + dy : r + dy + ny, r + dx : r + dx + nx]
    return out


def erode(mask, se: StructuringElement) -> np.ndarray:
    """Pixel set iff every structuring-element neighbor is set, with pixels
    outside the image counting as unset (border pixels erode against virtual
    background)."""
    m = _as_mask(mask)
    r = int(se.radius)
    padded = np.pad(m, r)
    ny, nx = m.shape
    out = np.ones_like(m)
    for dy, dx in se.offsets():
        out &= padded[r + dy : r + dy + ny, r + dx : r + dx + nx]
    return out


def close_mask(mask, se: StructuringElement) -> np.ndarray:
    """Binary closing: erode(dilate(mask)). The composition runs on a frame
    padded by the element radius, so the result contains the input
    (extensivity) and is idempotent even at image borders."""
    m = _as_mask(mask)
    r = int(se.radius)
    padded = np.pad(m, r)
    closed = erode(dilate(padded, se), se)
    return closed[r:-r, r:-r]


def close_bone_label(labels, se: StructuringElement) -> np.ndarray:
    """Close the bone mask of a dense label slice.

    Pixels newly covered by the closed bone mask are relabeled bone only where
    the current label is background; screw and corroded-screw pixels are never
    overwritten and bone pixels are never removed.
    """
    plane = np.asarray(labels)
    if plane.ndim != 2:
        raise ValueError("label slice must be 2D")
    if (plane == UNLABELED).any():
        raise ValueError("close_bone_label requires a dense slice (no 255 sentinels)")
    closed = close_mask(plane == BONE, se)
    out = plane.copy()
    out[closed & (plane == BACKGROUND)] = BONE
    return out
