"""Training loop and per-volume prediction for the multi-slice network."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import torch

from .augment import AffineRanges, apply_affine_pair, sample_affine_matrix
from .data import SamplePool
from .io_formats import UNLABELED, annotated_planes
from .losses import masked_weighted_cross_entropy
from .network import NetworkSpec, build_network

LOSS_MASK_MODES = ("dense", "scribble-masked")


@dataclass(frozen=True)
class TrainSpec:
    learning_rate: float = 0.005
    epochs: int = 250
    batch_size: int = 2
    loss_mask_mode: str = "dense"
    augment: AffineRanges = field(default_factory=AffineRanges)
    class_weights: tuple[float, ...] | None = None  # None: inverse frequency
    seed: int = 0

    def __post_init__(self):
        if min(self.learning_rate, self.epochs, self.batch_size) <= 0:
            raise ValueError("learning_rate, epochs and batch_size must be positive")
        if self.loss_mask_mode not in LOSS_MASK_MODES:
            raise ValueError(f"loss_mask_mode must be one of {LOSS_MASK_MODES}")
        if self.class_weights is not None and len(self.class_weights) != 4:
            raise ValueError("need exactly four class weights")


def train_fold(
    gray_volumes,
    target_volumes,
    net_spec: NetworkSpec = NetworkSpec(),
    train_spec: TrainSpec = TrainSpec(),
    log=None,
):
    """Train one network on the annotated planes of the given volumes."""
    torch.manual_seed(train_spec.seed)
    pool = SamplePool(
        gray_volumes,
        target_volumes,
        in_slices=net_spec.in_slices,
        dense_targets=train_spec.loss_mask_mode == "dense",
    )
    weights = (
        np.asarray(train_spec.class_weights, dtype=np.float64)
        if train_spec.class_weights is not None
        else pool.class_weights()
    )
    model = build_network(net_spec)
    model.train()
    optimizer = torch.optim.Adam(model.parameters(), lr=train_spec.learning_rate)
    rng = np.random.default_rng(train_spec.seed)
    weights_t = torch.as_tensor(weights, dtype=torch.float32)

    order = np.arange(len(pool))
    for epoch in range(train_spec.epochs):
        rng.shuffle(order)
        epoch_loss = 0.0
        batches = 0
        for start in range(0, len(order), train_spec.batch_size):
            chunk = order[start : start + train_spec.batch_size]
            crops, targets = [], []
            for index in chunk:
                crop, target = pool.fetch(int(index))
                crop, target = apply_affine_pair(
                    crop, target, sample_affine_matrix(train_spec.augment, rng)
                )
                crops.append(crop)
                targets.append(target)
            batch_x = torch.as_tensor(np.stack(crops), dtype=torch.float32).unsqueeze(1)
            batch_y = torch.as_tensor(np.stack(targets).astype(np.int64))
            optimizer.zero_grad()
            logits = model(batch_x)
            loss = masked_weighted_cross_entropy(logits, batch_y, weights_t)
            loss.backward()
            optimizer.step()
            epoch_loss += float(loss.detach())
            batches += 1
        if log is not None and (epoch + 1) % max(1, train_spec.epochs // 10) == 0:
            log(f"epoch {epoch + 1}/{train_spec.epochs}: mean loss {epoch_loss / batches:.4f}")
    model.eval()
    return model, weights


def predict_annotated_planes(model, gray: np.ndarray, planes, in_slices: int = 9):
    """Predict the given planes of one volume; all other planes stay 255."""
    from .data import extract_training_crop

    out = np.full(gray.shape, UNLABELED, dtype=np.uint8)
    model.eval()
    with torch.inference_mode():
        for z in planes:
            crop = extract_training_crop(np.asarray(gray, np.float32), int(z), in_slices)
            x = torch.as_tensor(crop, dtype=torch.float32)[None, None]
            logits = model(x).squeeze(0).squeeze(1)  # (C, H, W)
            out[z] = logits.argmax(dim=0).numpy().astype(np.uint8)
    return out


def reference_planes(reference_labels: np.ndarray) -> list[int]:
    return annotated_planes(reference_labels)
