"""Weighted cross-entropy with optional masking of unlabeled target pixels."""

from __future__ import annotations

import torch
import torch.nn.functional as F

from .io_formats import UNLABELED


def masked_weighted_cross_entropy(logits, target, weights, mask=None):
    """Mean over unmasked pixels of w[c] * (-log softmax(logits)[c]).

    logits: (B, C, 1, H, W) or (B, C, H, W); target: (B, H, W) integer labels,
    255 marking pixels without supervision. mask defaults to target != 255;
    dense targets therefore mask nothing. Masked pixels are dropped before the
    reduction, so logit values there cannot influence the loss at all.
    """
    if logits.ndim == 5:
        logits = logits.squeeze(2)
    if logits.ndim != 4:
        raise ValueError("expected logits of shape (B, C, H, W) or (B, C, 1, H, W)")
    if target.ndim != 3:
        raise ValueError("expected target of shape (B, H, W)")
    weights = torch.as_tensor(weights, dtype=logits.dtype, device=logits.device)
    if weights.shape != (logits.shape[1],):
        raise ValueError("need one class weight per channel")
    if mask is None:
        mask = target != UNLABELED
    if not bool(mask.any()):
        raise ValueError("loss undefined: every target pixel is masked")

    log_probs = F.log_softmax(logits, dim=1)
    flat_mask = mask.reshape(-1)
    classes = target.reshape(-1)[flat_mask].long()
    per_pixel = log_probs.permute(0, 2, 3, 1).reshape(-1, logits.shape[1])[flat_mask]
    picked = -per_pixel.gather(1, classes.unsqueeze(1)).squeeze(1)
    return (weights[classes] * picked).mean()
