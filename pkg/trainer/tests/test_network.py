import pytest
import torch
from torch import nn

from scribbletrain.network import NetworkSpec, build_network


def test_output_shape_contract():
    model = build_network(NetworkSpec())
    out = model(torch.randn(2, 1, 9, 64, 64))
    assert tuple(out.shape) == (2, 4, 1, 64, 64)


def test_parameter_count_deterministic():
    a = build_network(NetworkSpec())
    b = build_network(NetworkSpec())
    count = lambda m: sum(p.numel() for p in m.parameters())
    assert count(a) == count(b)
    shapes_a = [tuple(p.shape) for p in a.parameters()]
    shapes_b = [tuple(p.shape) for p in b.parameters()]
    assert shapes_a == shapes_b


def test_every_conv_followed_by_groupnorm():
    model = build_network(NetworkSpec())
    convs = [m for m in model.modules() if isinstance(m, nn.Conv3d)]
    norms = [m for m in model.modules() if isinstance(m, nn.GroupNorm)]
    assert len(convs) == len(norms)
    for norm in norms:
        assert norm.num_groups == 2
    # pairing is structural: each unit owns exactly one conv + norm + activation
    for module in model.modules():
        children = dict(module.named_children())
        if "conv" in children:
            assert isinstance(children["norm"], nn.GroupNorm)
            assert isinstance(children["act"], nn.LeakyReLU)


def test_eight_slice_variant():
    model = build_network(NetworkSpec(in_slices=8))
    out = model(torch.randn(1, 1, 8, 32, 32))
    assert tuple(out.shape) == (1, 4, 1, 32, 32)


def test_indivisible_plane_rejected():
    model = build_network(NetworkSpec())
    with pytest.raises(ValueError, match="divisible"):
        model(torch.randn(1, 1, 9, 30, 64))


def test_wrong_slice_count_rejected():
    model = build_network(NetworkSpec())
    with pytest.raises(ValueError, match="slices"):
        model(torch.randn(1, 1, 7, 64, 64))


def test_spec_validation():
    with pytest.raises(ValueError):
        NetworkSpec(in_slices=10)
    with pytest.raises(ValueError):
        NetworkSpec(classes=3)
    with pytest.raises(ValueError):
        NetworkSpec(base_width=6)


def test_forward_batch_one_and_small_plane():
    model = build_network(NetworkSpec())
    out = model(torch.randn(1, 1, 9, 16, 24))
    assert tuple(out.shape) == (1, 4, 1, 16, 24)
