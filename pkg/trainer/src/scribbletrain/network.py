"""2.5D multi-slice U-Net: a thin z-stack in, a single-plane prediction out.

The encoder's 3D convolutions use no z-padding, so the z extent shrinks as
features deepen and reaches 1 by the bottleneck; in-plane resolution follows
the usual two-level U-Net pool/upsample ladder with skip connections (skips
are center-cropped in z). Every convolution in the network is followed by a
two-group GroupNorm and a leaky ReLU.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
from torch import nn

N_CLASSES = 4
DOWNSAMPLE_FACTOR = 4  # two in-plane pooling stages


@dataclass(frozen=True)
class NetworkSpec:
    in_slices: int = 9  # center plane plus four below and four above
    classes: int = N_CLASSES
    norm_groups: int = 2
    negative_slope: float = 0.01
    base_width: int = 16

    def __post_init__(self):
        if not 1 <= self.in_slices <= 9:
            raise ValueError("in_slices must be in [1, 9] (four encoder convs reduce z)")
        if self.classes != N_CLASSES:
            raise ValueError("the label taxonomy fixes 4 output classes")
        if self.base_width % (2 * self.norm_groups) != 0:
            raise ValueError("base_width must be divisible by twice the group count")


def _z_kernel_plan(in_slices: int) -> list[int]:
    """z kernel size for the four encoder convs so the z extent lands on 1.

    9 planes -> (3,3,3,3); 8 planes -> (3,3,3,2), i.e. four slices below and
    three above the center still collapse to a single output plane.
    """
    remaining = in_slices - 1
    plan = []
    for _ in range(4):
        step = min(2, remaining)
        plan.append(step + 1)
        remaining -= step
    if remaining:
        raise ValueError(f"cannot reduce {in_slices} slices to 1 with four convolutions")
    return plan


class ConvUnit(nn.Module):
    """Conv3d + GroupNorm + LeakyReLU; z-valid when kz > 1, in-plane padded."""

    def __init__(self, in_ch, out_ch, kz, groups, slope):
        super().__init__()
        self.conv = nn.Conv3d(in_ch, out_ch, (kz, 3, 3), padding=(0, 1, 1))
        self.norm = nn.GroupNorm(groups, out_ch)
        self.act = nn.LeakyReLU(slope)

    def forward(self, x):
        return self.act(self.norm(self.conv(x)))


class HeadUnit(nn.Module):
    """1x1x1 classifier conv, also followed by GroupNorm + LeakyReLU."""

    def __init__(self, in_ch, classes, groups, slope):
        super().__init__()
        self.conv = nn.Conv3d(in_ch, classes, 1)
        self.norm = nn.GroupNorm(groups, classes)
        self.act = nn.LeakyReLU(slope)

    def forward(self, x):
        return self.act(self.norm(self.conv(x)))


class MultiSliceUNet(nn.Module):
    def __init__(self, spec: NetworkSpec):
        super().__init__()
        self.spec = spec
        w = spec.base_width
        g = spec.norm_groups
        s = spec.negative_slope
        kz = _z_kernel_plan(spec.in_slices)

        self.enc1a = ConvUnit(1, w, kz[0], g, s)
        self.enc1b = ConvUnit(w, w, kz[1], g, s)
        self.pool = nn.MaxPool3d((1, 2, 2))
        self.enc2a = ConvUnit(w, 2 * w, kz[2], g, s)
        self.enc2b = ConvUnit(2 * w, 2 * w, kz[3], g, s)
        self.bott_a = ConvUnit(2 * w, 4 * w, 1, g, s)
        self.bott_b = ConvUnit(4 * w, 4 * w, 1, g, s)
        self.up = nn.Upsample(scale_factor=(1, 2, 2), mode="nearest")
        self.dec2_reduce = ConvUnit(4 * w, 2 * w, 1, g, s)
        self.dec2 = ConvUnit(4 * w, 2 * w, 1, g, s)
        self.dec1_reduce = ConvUnit(2 * w, w, 1, g, s)
        self.dec1 = ConvUnit(2 * w, w, 1, g, s)
        self.head = HeadUnit(w, spec.classes, g, s)

    @staticmethod
    def _center_z(x, target_z=1):
        z = x.shape[2]
        start = (z - target_z) // 2
        return x[:, :, start : start + target_z]

    def forward(self, x):
        if x.ndim != 5 or x.shape[1] != 1:
            raise ValueError("expected input of shape (batch, 1, in_slices, H, W)")
        if x.shape[2] != self.spec.in_slices:
            raise ValueError(
                f"network built for {self.spec.in_slices} slices, got {x.shape[2]}"
            )
        if x.shape[3] % DOWNSAMPLE_FACTOR or x.shape[4] % DOWNSAMPLE_FACTOR:
            raise ValueError(
                f"H and W must be divisible by the downsampling factor {DOWNSAMPLE_FACTOR}"
            )
        skip1 = self.enc1b(self.enc1a(x))
        skip2 = self.enc2b(self.enc2a(self.pool(skip1)))
        deep = self.bott_b(self.bott_a(self.pool(skip2)))
        up2 = self.dec2_reduce(self.up(deep))
        dec2 = self.dec2(torch.cat([up2, self._center_z(skip2)], dim=1))
        up1 = self.dec1_reduce(self.up(dec2))
        dec1 = self.dec1(torch.cat([up1, self._center_z(skip1)], dim=1))
        return self.head(dec1)


def build_network(spec: NetworkSpec) -> MultiSliceUNet:
    """Deterministic construction: same spec, same parameter shapes and count."""
    return MultiSliceUNet(spec)
