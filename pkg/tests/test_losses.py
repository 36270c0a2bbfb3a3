import math

import numpy as np
import pytest
import torch

from chromaflow.errors import ValidationError
from chromaflow.flowwarp import GroundTruthFlow
from chromaflow.synthdata import SynthSpec, generate_clip
from chromaflow.training import (
    loss_color_cp,
    loss_cp,
    loss_joint,
    loss_seg_cp,
    loss_ss,
    psnr,
    ssim,
    temporal_warp_error,
)


def _scalar_l1(a, b):
    total = 0.0
    count = 0
    for x, y in zip(np.asarray(a).ravel(), np.asarray(b).ravel()):
        total += abs(float(x) - float(y))
        count += 1
    return total / count


# ---------------------------------------------------------------------------
# loss algebra
# ---------------------------------------------------------------------------

def test_color_loss_trivials():
    assert loss_color_cp(np.full((4, 4, 2), 0.3), np.full((4, 4, 2), 0.3)) == 0.0
    assert loss_color_cp(np.full((4, 4, 2), 0.6), np.full((4, 4, 2), 0.5)) == pytest.approx(0.1)


def test_color_loss_matches_scalar_loop():
    rng = np.random.default_rng(0)
    a, b = rng.uniform(size=(5, 7, 2)), rng.uniform(size=(5, 7, 2))
    assert loss_color_cp(a, b) == pytest.approx(_scalar_l1(a, b), abs=1e-7)


def test_seg_loss_trivials_and_oracle():
    assert loss_seg_cp(np.zeros((3, 3)), np.zeros((3, 3))) == 0.0
    assert loss_seg_cp(np.zeros((3, 3)), np.ones((3, 3))) == pytest.approx(1.0)
    rng = np.random.default_rng(1)
    p, q = rng.uniform(size=(6, 6)), rng.uniform(size=(6, 6))
    assert loss_seg_cp(p, q) == pytest.approx(_scalar_l1(p, q), abs=1e-7)


def test_combined_colorizer_loss():
    rng = np.random.default_rng(2)
    y, gt = rng.uniform(size=(4, 4, 2)), rng.uniform(size=(4, 4, 2))
    p, q = rng.uniform(size=(4, 4)), rng.uniform(size=(4, 4))
    assert loss_cp(y, gt, p, q, lambda_s=0.0) == pytest.approx(loss_color_cp(y, gt))
    # color loss 0.2, seg loss 0.5, weight 0.1 -> 0.25
    assert loss_cp(
        np.full((2, 2, 2), 0.7), np.full((2, 2, 2), 0.5), np.full((2, 2), 0.5), np.full((2, 2), 0.0),
        lambda_s=0.1,
    ) == pytest.approx(0.25)
    for lam in (0.0, 0.5, 2.0):
        expected = loss_color_cp(y, gt) + lam * loss_seg_cp(p, q)
        assert loss_cp(y, gt, p, q, lam) == pytest.approx(expected, abs=1e-12)


def test_smoothing_loss():
    d = np.full((4, 4, 2), 0.5)
    z = np.full((8, 8, 2), 0.55)
    assert loss_ss(d, d, z, z) == 0.0
    assert loss_ss(d, d, z, np.full((8, 8, 2), 0.5)) == pytest.approx(0.05)
    rng = np.random.default_rng(3)
    args = [rng.uniform(size=s) for s in ((4, 4, 2), (4, 4, 2), (8, 8, 2), (8, 8, 2))]
    expected = _scalar_l1(args[0], args[1]) + _scalar_l1(args[2], args[3])
    assert loss_ss(*args) == pytest.approx(expected, abs=1e-7)


def test_joint_loss_composition():
    rng = np.random.default_rng(4)
    y, gt_low = rng.uniform(size=(4, 4, 2)), rng.uniform(size=(4, 4, 2))
    p, q = rng.uniform(size=(4, 4)), rng.uniform(size=(4, 4))
    z, gt_full = rng.uniform(size=(8, 8, 2)), rng.uniform(size=(8, 8, 2))
    d = rng.uniform(size=(4, 4, 2))
    expected = loss_cp(y, gt_low, p, q, 0.1) + loss_ss(d, gt_low, z, gt_full)
    assert loss_joint(y, gt_low, p, q, d, z, gt_full, 0.1) == pytest.approx(expected, abs=1e-12)
    oracle = (
        _scalar_l1(y, gt_low) + 0.1 * _scalar_l1(p, q) + _scalar_l1(d, gt_low) + _scalar_l1(z, gt_full)
    )
    assert loss_joint(y, gt_low, p, q, d, z, gt_full, 0.1) == pytest.approx(oracle, abs=1e-7)


def test_losses_nonnegative_and_zero_iff_equal():
    rng = np.random.default_rng(5)
    for _ in range(20):
        a = rng.uniform(size=(3, 5, 2))
        b = rng.uniform(size=(3, 5, 2))
        val = loss_color_cp(a, b)
        assert val >= 0.0
        assert (val == 0.0) == bool(np.array_equal(a, b))
    a = rng.uniform(size=(3, 5, 2))
    assert loss_color_cp(a, a) == 0.0


def test_loss_shape_mismatch_rejected():
    with pytest.raises(ValidationError):
        loss_color_cp(np.zeros((4, 4, 2)), np.zeros((4, 5, 2)))


def test_loss_gradients_match_finite_differences():
    torch.manual_seed(0)
    y = torch.rand(3, 4, dtype=torch.float64, requires_grad=True)
    gt = torch.rand(3, 4, dtype=torch.float64)
    loss = loss_color_cp(y, gt)
    loss.backward()
    h = 1e-6
    for idx in [(0, 0), (1, 2), (2, 3)]:
        with torch.no_grad():
            y_plus = y.clone()
            y_plus[idx] += h
            y_minus = y.clone()
            y_minus[idx] -= h
            fd = (loss_color_cp(y_plus, gt) - loss_color_cp(y_minus, gt)) / (2 * h)
        assert float(fd) == pytest.approx(float(y.grad[idx]), rel=1e-6)


# ---------------------------------------------------------------------------
# psnr / ssim
# ---------------------------------------------------------------------------

def test_psnr_trivials():
    img = np.random.default_rng(6).uniform(size=(16, 16))
    assert psnr(img, img) == 100.0
    assert psnr(np.zeros((8, 8)), np.full((8, 8), 0.1)) == pytest.approx(20.0)


def test_ssim_identical_is_one():
    img = np.random.default_rng(7).uniform(size=(16, 16))
    assert ssim(img, img) == pytest.approx(1.0)


def test_ssim_matches_single_window_oracle():
    rng = np.random.default_rng(8)
    x = rng.uniform(size=(11, 11))
    y = np.clip(x + rng.normal(0, 0.1, size=(11, 11)), 0, 1)

    # independent single-window computation with explicit Gaussian weights
    coords = np.arange(11) - 5.0
    g = np.exp(-(coords**2) / (2 * 1.5**2))
    w = np.outer(g, g)
    w /= w.sum()
    mu_x = float((w * x).sum())
    mu_y = float((w * y).sum())
    var_x = float((w * x * x).sum()) - mu_x**2
    var_y = float((w * y * y).sum()) - mu_y**2
    cov = float((w * x * y).sum()) - mu_x * mu_y
    c1, c2 = 0.01**2, 0.03**2
    expected = ((2 * mu_x * mu_y + c1) * (2 * cov + c2)) / (
        (mu_x**2 + mu_y**2 + c1) * (var_x + var_y + c2)
    )
    assert ssim(x, y) == pytest.approx(expected, abs=1e-6)


def test_ssim_degrades_with_noise():
    rng = np.random.default_rng(9)
    img = rng.uniform(size=(32, 32))
    noisy = np.clip(img + rng.normal(0, 0.2, size=(32, 32)), 0, 1)
    assert ssim(img, noisy) < ssim(img, img)


# ---------------------------------------------------------------------------
# temporal warp error
# ---------------------------------------------------------------------------

def test_warp_error_zero_for_static_clip():
    frames = [np.full((8, 8, 2), 0.4)] * 4
    flows = [np.zeros((8, 8, 2))] * 3
    assert temporal_warp_error(frames, flows) == 0.0


def test_warp_error_small_on_ground_truth_clip():
    clip = generate_clip(SynthSpec(n_frames=6, resolution=(96, 128), n_objects=2, seed=10))
    frames = [clip.ab(t) for t in range(clip.n_frames)]
    grays = [clip.gray(t) for t in range(clip.n_frames)]
    err = temporal_warp_error(frames, clip.flows_forward, grays=grays)
    assert err < 2.0 / 255.0


def test_warp_error_orders_shuffled_above_ordered():
    clip = generate_clip(SynthSpec(n_frames=6, resolution=(96, 128), n_objects=2, seed=11))
    frames = [clip.ab(t) for t in range(clip.n_frames)]
    grays = [clip.gray(t) for t in range(clip.n_frames)]
    ordered = temporal_warp_error(frames, clip.flows_forward, grays=grays)
    shuffled = temporal_warp_error(frames[::-1], clip.flows_forward, grays=grays)
    assert shuffled > ordered
