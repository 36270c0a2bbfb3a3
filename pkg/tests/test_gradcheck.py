"""Autodiff-versus-finite-difference checks on tiny double-precision models."""

import numpy as np
import pytest
import torch

from gradcheck import check_module_gradients, check_tensor_gradient

from chromaflow.nets.cpnet import CpnetConfig, init_cpnet
from chromaflow.nets.ssnet import SsnetConfig, init_ssnet
from chromaflow.training import loss_cp

GRADCHECK_CPNET = CpnetConfig(
    base_channels=2, depth=2, semantic_base=2, bottleneck_blocks=1, semantic_encoder_seed=5
)
GRADCHECK_SSNET = SsnetConfig(refinement_channels=2, combination_channels=3, sr_channels=3, sr_ratio=2)


def build_double_cpnet(seed=0):
    net = init_cpnet(GRADCHECK_CPNET, seed=seed).double()
    assert sum(p.numel() for p in net.trainable_parameters()) <= 5000
    return net


def test_cpnet_gradients_match_finite_differences():
    torch.manual_seed(0)
    net = build_double_cpnet()
    gray = torch.rand(1, 1, 32, 32, dtype=torch.float64)
    smap = torch.rand(1, 3, 32, 32, dtype=torch.float64)
    gt_ab = torch.rand(1, 2, 32, 32, dtype=torch.float64)
    gt_seg = torch.rand(1, 1, 32, 32, dtype=torch.float64)

    def loss_fn():
        color, seg = net(gray, smap)
        return loss_cp(color, gt_ab, seg, gt_seg, 0.1)

    assert check_module_gradients(net, loss_fn) > 50


@pytest.mark.parametrize("module_name", ["refine", "combine", "superres"])
def test_ssnet_gradients_match_finite_differences(module_name):
    torch.manual_seed(1)
    smoother = init_ssnet(GRADCHECK_SSNET, seed=1).double()
    weight = torch.rand(1, 2, 32, 32, dtype=torch.float64)

    if module_name == "refine":
        ab = torch.rand(1, 2, 32, 32, dtype=torch.float64)
        mask = torch.rand(1, 1, 32, 32, dtype=torch.float64)
        module = smoother.refine
        loss_fn = lambda: (module(ab, mask) * weight).sum()
    elif module_name == "combine":
        streams = [torch.rand(1, 2, 32, 32, dtype=torch.float64) for _ in range(9)]
        module = smoother.combine
        loss_fn = lambda: (module(streams[0], streams[1:7], streams[7], streams[8]) * weight).sum()
    else:
        d = torch.rand(1, 2, 32, 32, dtype=torch.float64)
        gray = torch.rand(1, 1, 64, 64, dtype=torch.float64)
        w_full = torch.rand(1, 2, 64, 64, dtype=torch.float64)
        module = smoother.superres
        loss_fn = lambda: (module(d, gray, 2) * w_full).sum()

    assert check_module_gradients(module, loss_fn, stride=20) > 20


def test_correspondence_gradient_wrt_reference_values():
    from chromaflow.nets.ssnet import correspondence_warp

    torch.manual_seed(2)
    rng = np.random.default_rng(3)
    sim = torch.from_numpy(rng.uniform(-1, 1, size=(64, 64)))
    y1 = torch.from_numpy(rng.uniform(0.2, 0.8, size=(8, 8, 2))).requires_grad_(True)
    weight = torch.from_numpy(rng.uniform(size=(32, 32, 2)))

    def loss_fn():
        return (correspondence_warp(sim, y1, tau=200.0) * weight).sum()

    assert check_tensor_gradient(y1, loss_fn, stride=5) > 20
