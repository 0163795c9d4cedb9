"""Crop extraction and the training sample pool over annotated planes."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .io_formats import UNLABELED, annotated_planes

N_CLASSES = 4


def extract_training_crop(gray: np.ndarray, z: int, in_slices: int = 9) -> np.ndarray:
    """The z-stack of input planes paired with target plane z.

    For 9 slices that is [z-4 .. z+4]; for 8, four below and three above.
    Planes beyond the volume borders are replicated from the edge plane.
    """
    if gray.ndim != 3:
        raise ValueError("expected a (nz, ny, nx) volume")
    nz = gray.shape[0]
    if not 0 <= z < nz:
        raise IndexError(f"plane {z} outside [0, {nz})")
    below = in_slices // 2
    above = in_slices - 1 - below
    indices = np.clip(np.arange(z - below, z + above + 1), 0, nz - 1)
    return gray[indices]


@dataclass(frozen=True)
class Sample:
    volume_id: int
    z: int


class SamplePool:
    """All (volume, annotated plane) pairs of a training split."""

    def __init__(self, gray_volumes, target_volumes, in_slices=9, dense_targets=True):
        if len(gray_volumes) != len(target_volumes):
            raise ValueError("need one target volume per gray volume")
        self.gray_volumes = [np.asarray(g, dtype=np.float32) for g in gray_volumes]
        self.target_volumes = [np.asarray(t, dtype=np.uint8) for t in target_volumes]
        self.in_slices = in_slices
        self.samples: list[Sample] = []
        for vid, target in enumerate(self.target_volumes):
            if target.shape != self.gray_volumes[vid].shape:
                raise ValueError("gray/target shape mismatch")
            for z in annotated_planes(target):
                plane = target[z]
                if dense_targets and (plane == UNLABELED).any():
                    raise ValueError(
                        f"volume {vid} plane {z} is not dense but dense targets were requested"
                    )
                self.samples.append(Sample(vid, z))
        if not self.samples:
            raise ValueError("no annotated planes in the training split")

    def __len__(self):
        return len(self.samples)

    def fetch(self, index: int):
        sample = self.samples[index]
        crop = extract_training_crop(
            self.gray_volumes[sample.volume_id], sample.z, self.in_slices
        )
        target = self.target_volumes[sample.volume_id][sample.z]
        return crop, target

    def class_weights(self) -> np.ndarray:
        """Inverse class frequency over the unmasked target pixels, normalized
        to mean 1; classes absent from the split get the largest seen weight."""
        counts = np.zeros(N_CLASSES, dtype=np.float64)
        for sample in self.samples:
            plane = self.target_volumes[sample.volume_id][sample.z]
            valid = plane[plane != UNLABELED]
            counts += np.bincount(valid, minlength=N_CLASSES)[:N_CLASSES]
        present = counts > 0
        weights = np.zeros(N_CLASSES)
        weights[present] = 1.0 / counts[present]
        if (~present).any():
            weights[~present] = weights[present].max()
        return weights / weights.mean()
