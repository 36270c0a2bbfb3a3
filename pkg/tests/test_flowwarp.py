import math

import numpy as np
import pytest
import torch

from chromaflow.errors import ValidationError
from chromaflow.flowwarp import (
    FileFlow,
    GroundTruthFlow,
    ZeroFlow,
    compose_flows,
    invert_flow,
    occlusion_mask,
    rescale_flow,
    warp_backward,
)
from chromaflow.synthdata import SynthSpec, generate_clip, save_clip


def _uniform_flow(hw, dx, dy):
    flow = np.zeros((*hw, 2))
    flow[..., 0] = dx
    flow[..., 1] = dy
    return flow


def _dilate(mask, steps):
    out = mask.copy()
    for _ in range(steps):
        grown = out.copy()
        grown[1:] |= out[:-1]
        grown[:-1] |= out[1:]
        grown[:, 1:] |= out[:, :-1]
        grown[:, :-1] |= out[:, 1:]
        out = grown
    return out


def occlusion_exclusion(seg_t, seg_next, flow, margin=2):
    """Pixels near occlusion boundaries: seg disagreement after warping, or any
    mask edge in either aligned frame, dilated by ``margin``."""
    warped_seg = warp_backward(seg_next, flow)
    disagree = np.abs(warped_seg - seg_t) > 0.25
    edges = np.zeros_like(disagree)
    for seg in (seg_t, warped_seg):
        hard = seg > 0.5
        edge = np.zeros_like(hard)
        edge[1:] |= hard[1:] != hard[:-1]
        edge[:-1] |= hard[:-1] != hard[1:]
        edge[:, 1:] |= hard[:, 1:] != hard[:, :-1]
        edge[:, :-1] |= hard[:, :-1] != hard[:, 1:]
        edges |= edge
    return _dilate(disagree | edges, margin)


# ---------------------------------------------------------------------------
# warp_backward
# ---------------------------------------------------------------------------

def test_zero_flow_is_bit_identity():
    rng = np.random.default_rng(0)
    src = rng.uniform(size=(13, 17))
    out = warp_backward(src, np.zeros((13, 17, 2)))
    np.testing.assert_array_equal(out, src)


def test_integer_shift_matches_indexing_oracle():
    rng = np.random.default_rng(1)
    src = rng.uniform(size=(10, 20))
    out = warp_backward(src, _uniform_flow((10, 20), 3, 0))
    # direct-indexing oracle with border replication
    cols = np.minimum(np.arange(20) + 3, 19)
    expected = src[:, cols]
    np.testing.assert_allclose(out, expected, atol=1e-12)


def test_half_pixel_shift_of_spike_row():
    src = np.zeros((1, 9))
    src[0, 4] = 1.0
    out = warp_backward(src, _uniform_flow((1, 9), 0.5, 0))
    # sampling at x + 0.5 puts weight 0.5 on the spike from both neighbors
    expected = np.zeros((1, 9))
    expected[0, 3] = 0.5
    expected[0, 4] = 0.5
    np.testing.assert_allclose(out, expected, atol=1e-12)


def test_warp_is_linear_in_src():
    rng = np.random.default_rng(2)
    x = rng.uniform(size=(12, 14))
    y = rng.uniform(size=(12, 14))
    flow = rng.uniform(-2, 2, size=(12, 14, 2))
    lhs = warp_backward(2.5 * x - 0.7 * y, flow)
    rhs = 2.5 * warp_backward(x, flow) - 0.7 * warp_backward(y, flow)
    assert np.abs(lhs - rhs).max() < 1e-6


def test_warp_shape_mismatch_rejected():
    with pytest.raises(ValidationError):
        warp_backward(np.zeros((4, 4)), np.zeros((4, 5, 2)))


def test_warp_torch_matches_numpy_and_is_differentiable():
    rng = np.random.default_rng(3)
    src = rng.uniform(size=(8, 9))
    flow = rng.uniform(-1.5, 1.5, size=(8, 9, 2))
    out_np = warp_backward(src, flow)
    src_t = torch.from_numpy(src).requires_grad_(True)
    out_t = warp_backward(src_t, torch.from_numpy(flow))
    np.testing.assert_allclose(out_t.detach().numpy(), out_np, atol=1e-12)
    out_t.sum().backward()
    assert src_t.grad is not None and torch.isfinite(src_t.grad).all()


def test_warp_oracle_reconstructs_synthetic_frames():
    clip = generate_clip(SynthSpec(n_frames=6, resolution=(96, 160), n_objects=2, seed=4))
    for t in range(clip.n_frames - 1):
        flow = clip.flows_forward[t]
        valid = ~occlusion_exclusion(clip.seg_maps[t], clip.seg_maps[t + 1], flow)
        err = np.abs(warp_backward(clip.gray(t + 1), flow) - clip.gray(t))
        assert err[valid].max() < 2.0 / 255.0
        err_ab = np.abs(warp_backward(clip.ab(t + 1), flow) - clip.ab(t))
        assert err_ab[valid].max() < 2.0 / 255.0


# ---------------------------------------------------------------------------
# occlusion_mask
# ---------------------------------------------------------------------------

def test_mask_is_one_for_identical_frames():
    img = np.random.default_rng(5).uniform(size=(6, 6))
    np.testing.assert_array_equal(occlusion_mask(img, img, alpha=200.0), np.ones((6, 6)))


def test_mask_matches_scalar_evaluation():
    warped = np.full((2, 2), 0.6)
    target = np.full((2, 2), 0.5)
    mask = occlusion_mask(warped, target, alpha=200.0)
    np.testing.assert_allclose(mask, math.exp(-2.0), atol=1e-12)


def test_mask_range_and_monotonicity():
    rng = np.random.default_rng(6)
    warped = rng.uniform(size=(16, 16))
    target = rng.uniform(size=(16, 16))
    mask = occlusion_mask(warped, target, alpha=200.0)
    assert mask.min() > 0.0 and mask.max() <= 1.0
    # pointwise monotone decreasing in |warped - target| and in alpha
    diffs = np.linspace(0, 1, 11)
    masks = [occlusion_mask(np.array([[d]]), np.array([[0.0]]), alpha=200.0)[0, 0] for d in diffs]
    assert all(a >= b for a, b in zip(masks, masks[1:]))
    for alpha_lo, alpha_hi in [(10.0, 50.0), (50.0, 200.0)]:
        lo = occlusion_mask(warped, target, alpha=alpha_lo)
        hi = occlusion_mask(warped, target, alpha=alpha_hi)
        assert np.all(hi <= lo + 1e-15)


def test_mask_rejects_bad_alpha():
    img = np.zeros((2, 2))
    with pytest.raises(ValidationError):
        occlusion_mask(img, img, alpha=0.0)


# ---------------------------------------------------------------------------
# compose / rescale / invert
# ---------------------------------------------------------------------------

def test_compose_identity_element():
    rng = np.random.default_rng(7)
    f = rng.uniform(-2, 2, size=(9, 11, 2))
    zero = np.zeros_like(f)
    np.testing.assert_allclose(compose_flows(zero, f), f, atol=1e-12)
    np.testing.assert_allclose(compose_flows(f, zero), f, atol=1e-12)


def test_compose_translations_add():
    a = _uniform_flow((8, 8), 1, 0)
    b = _uniform_flow((8, 8), 2, 0)
    np.testing.assert_allclose(compose_flows(a, b), _uniform_flow((8, 8), 3, 0), atol=1e-12)


def _rotation_flow(hw, angle, center):
    h, w = hw
    ys, xs = np.mgrid[0:h, 0:w]
    rel = np.stack([xs - center[0], ys - center[1]], axis=-1).astype(float)
    c, s = np.cos(angle), np.sin(angle)
    rot = np.array([[c, -s], [s, c]])
    return rel @ (rot - np.eye(2)).T


def test_compose_rotations_matches_analytic_composite():
    hw = (32, 32)
    center = (15.5, 15.5)
    f1 = _rotation_flow(hw, 0.05, center)
    f2 = _rotation_flow(hw, 0.08, center)
    composed = compose_flows(f1, f2)
    expected = _rotation_flow(hw, 0.13, center)
    interior = (slice(4, -4), slice(4, -4))
    assert np.abs(composed[interior] - expected[interior]).max() < 1e-4


def test_rescale_identity_and_units():
    rng = np.random.default_rng(8)
    f = rng.uniform(-3, 3, size=(10, 12, 2))
    np.testing.assert_array_equal(rescale_flow(f, (10, 12)), f)
    up = rescale_flow(_uniform_flow((8, 8), 1, 0), (16, 16))
    np.testing.assert_allclose(up, _uniform_flow((16, 16), 2, 0), atol=1e-12)


def test_rescale_matches_regenerated_small_resolution_flow():
    big = SynthSpec(
        n_frames=2,
        resolution=(128, 128),
        n_objects=1,
        motion_model="translation",
        seed=9,
        motion_overrides=((np.eye(2), (2.0, 0.0)),),
    )
    clip = generate_clip(big)
    small = rescale_flow(clip.flows_forward[0], (64, 64))
    # regenerate at the target resolution: same translation is 1 px there
    seg_small = np.asarray(
        torch.nn.functional.interpolate(
            torch.from_numpy(clip.seg_maps[0])[None, None], size=(64, 64), mode="area"
        )[0, 0]
    )
    interior = seg_small > 0.999
    interior &= ~_dilate(~interior, 3)
    assert interior.sum() > 25
    assert np.abs(small[interior][:, 0] - 1.0).max() < 1e-3
    assert np.abs(small[interior][:, 1] - 0.0).max() < 1e-3
    background = seg_small < 1e-3
    background &= ~_dilate(~background, 4)
    assert np.abs(small[background]).max() < 1e-3


def test_invert_uniform_flow_is_exact_negation():
    f = _uniform_flow((8, 8), 2.0, -1.0)
    np.testing.assert_allclose(invert_flow(f), -f, atol=1e-12)


# ---------------------------------------------------------------------------
# providers
# ---------------------------------------------------------------------------

@pytest.fixture(scope="module")
def translating_clip():
    return generate_clip(
        SynthSpec(
            n_frames=8,
            resolution=(96, 128),
            n_objects=1,
            motion_model="translation",
            seed=10,
            motion_overrides=((np.eye(2), (2.0, 1.0)),),
        )
    )


def test_ground_truth_provider_multi_step(translating_clip):
    clip = translating_clip
    provider = GroundTruthFlow(clip.flows_forward)
    for j, i in [(3, 0), (0, 3), (5, 2), (2, 5), (4, 4)]:
        flow = provider.between(j, i)
        valid = ~occlusion_exclusion(
            clip.seg_maps[i], clip.seg_maps[j], flow, margin=3 + 2 * abs(j - i)
        )
        err = np.abs(warp_backward(clip.gray(j), flow) - clip.gray(i))
        assert err[valid].max() < 2.0 / 255.0, (j, i)


def test_ground_truth_provider_rescales(translating_clip):
    provider = GroundTruthFlow(translating_clip.flows_forward)
    flow = provider.between(1, 0, hw=(48, 64))
    assert flow.shape == (48, 64, 2)


def test_zero_flow_provider():
    provider = ZeroFlow((8, 10))
    assert provider.between(3, 1).shape == (8, 10, 2)
    assert not provider.between(3, 1).any()
    assert not provider.step_forward(0).any()


def test_file_flow_provider_matches_ground_truth(tmp_path, translating_clip):
    save_clip(translating_clip, tmp_path)
    from_file = FileFlow(str(tmp_path))
    gt = GroundTruthFlow(translating_clip.flows_forward)
    np.testing.assert_array_equal(from_file.between(4, 1), gt.between(4, 1))
    np.testing.assert_array_equal(from_file.step_forward(2), gt.step_forward(2))
