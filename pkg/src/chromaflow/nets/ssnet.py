"""Temporal smoothing stage: refinement of flow-warped neighbors, long-range
correspondence to the first colorized frame, aggregation of all nine
chrominance streams, and the multi-ratio super-resolution tail.

All spatial processing runs at the fixed low "processing" resolution; only the
super-resolution tail touches the output resolution, so the arithmetic cost of
everything else is independent of the final video size.
"""

from dataclasses import dataclass

import numpy as np
import torch
import torch.nn as nn

from ..errors import ValidationError
from .blocks import RRDB, bounded_residual, conv_block, glorot_init, upsample2, zero_init
from .encoder import FrozenEncoder, build_feature_pyramid, pyramid_from_nchw

# frame offsets aggregated as short-range context around the current frame
SHORT_RANGE_OFFSETS = (-3, -2, -1, 1, 2, 3)

DEFAULT_TEMPERATURE = 200.0

SR_RATIOS = (2, 4, 8)


@dataclass
class SsnetConfig:
    refinement_channels: int = 16
    combination_channels: int = 32
    sr_channels: int = 32
    sr_ratio: int = 2
    tau: float = DEFAULT_TEMPERATURE

    def validate(self):
        if self.sr_ratio not in SR_RATIOS:
            raise ValidationError(f"sr_ratio must be one of {SR_RATIOS}, got {self.sr_ratio}")
        if self.tau <= 0:
            raise ValidationError(f"tau must be positive, got {self.tau}")


class RefineNet(nn.Module):
    """Corrects warping artifacts in one (a, b, confidence) stream.

    Instance-normalized encoder-decoder producing a pre-sigmoid correction on
    top of the warped chrominance, so an untouched stream passes through.
    Internals run at half resolution; chrominance is smooth enough that the
    upsampled correction loses nothing.
    """

    def __init__(self, channels=16):
        super().__init__()
        c = channels
        self.enc1 = conv_block(3, c, stride=2, norm=True)
        self.enc2 = conv_block(c, 2 * c, stride=2, norm=True)
        self.mid = conv_block(2 * c, 2 * c, norm=True)
        self.dec1 = conv_block(2 * c + c, c, norm=True)
        self.delta = zero_init(nn.Conv2d(c, 2, 3, 1, 1))

    def forward(self, warped_ab, mask):
        if warped_ab.shape[2:] != mask.shape[2:]:
            raise ValidationError("warped chrominance and mask resolutions differ")
        x = torch.cat([warped_ab, mask], dim=1)
        e1 = self.enc1(x)
        e2 = self.mid(self.enc2(e1))
        d1 = self.dec1(torch.cat([upsample2(e2), e1], dim=1))
        return bounded_residual(warped_ab, upsample2(self.delta(d1)))


class CombineNet(nn.Module):
    """Aggregates the current colorization with six refined neighbors, the
    refined previous output, and the correspondence stream (18 planes in) into
    the smoothed chrominance for the current frame."""

    def __init__(self, channels=32):
        super().__init__()
        c = channels
        self.enc1 = conv_block(18, c)
        self.enc2 = conv_block(c, 2 * c, stride=2)
        self.enc3 = conv_block(2 * c, 2 * c, stride=2)
        self.mid = conv_block(2 * c, 2 * c)
        self.dec2 = conv_block(2 * c + 2 * c, c)
        self.dec1 = conv_block(c + c, c)
        self.delta = zero_init(nn.Conv2d(c, 2, 3, 1, 1))

    def forward(self, current_ab, refined_neighbors, refined_prev, corresp):
        streams = [current_ab, *refined_neighbors, refined_prev, corresp]
        for s in streams:
            if s.shape[2:] != current_ab.shape[2:]:
                raise ValidationError("combination inputs must share one resolution")
        if len(refined_neighbors) != len(SHORT_RANGE_OFFSETS):
            raise ValidationError(
                f"expected {len(SHORT_RANGE_OFFSETS)} refined neighbors, got {len(refined_neighbors)}"
            )
        x = torch.cat(streams, dim=1)
        e1 = self.enc1(x)
        e2 = self.enc2(e1)
        e3 = self.mid(self.enc3(e2))
        d2 = self.dec2(torch.cat([upsample2(e3), e2], dim=1))
        d1 = self.dec1(torch.cat([upsample2(d2), e1], dim=1))
        return bounded_residual(current_ab, self.delta(d1))


class SuperResNet(nn.Module):
    """Shared low-resolution feature head with one upsampling tail per ratio.

    The full-resolution luminance is injected as guidance through a single
    fusion conv so output-resolution arithmetic stays minimal.
    """

    def __init__(self, channels=32):
        super().__init__()
        c = channels
        self.head = nn.Sequential(conv_block(3, c), RRDB(c, max(c // 2, 4)), conv_block(c, c))
        self.tails = nn.ModuleDict(
            {str(r): nn.Conv2d(c, 2 * r * r, 3, 1, 1) for r in SR_RATIOS}
        )
        self.fuse = zero_init(nn.Conv2d(5, 2, 3, 1, 1))

    def forward(self, d_ab, gray_full, ratio):
        ratio = int(ratio)
        if ratio not in SR_RATIOS:
            raise ValidationError(f"ratio must be one of {SR_RATIOS}, got {ratio}")
        h, w = d_ab.shape[2:]
        if gray_full.shape[2:] != (h * ratio, w * ratio):
            raise ValidationError(
                f"full-res gray {tuple(gray_full.shape[2:])} != ratio x input {(h * ratio, w * ratio)}"
            )
        gray_low = nn.functional.interpolate(gray_full, size=(h, w), mode="area")
        feats = self.head(torch.cat([d_ab, gray_low], dim=1))
        detail = nn.functional.pixel_shuffle(self.tails[str(ratio)](feats), ratio)
        base = nn.functional.interpolate(
            d_ab, size=gray_full.shape[2:], mode="bilinear", align_corners=False
        )
        delta = self.fuse(torch.cat([base, detail, gray_full], dim=1))
        return bounded_residual(base, delta)


class TemporalSmoother(nn.Module):
    """Container for the three learned smoothing modules."""

    def __init__(self, config: SsnetConfig):
        super().__init__()
        config.validate()
        self.config = config
        self.refine = RefineNet(config.refinement_channels)
        self.combine = CombineNet(config.combination_channels)
        self.superres = SuperResNet(config.sr_channels)


def init_ssnet(config: SsnetConfig, seed=0) -> TemporalSmoother:
    net = TemporalSmoother(config)
    gen = torch.Generator().manual_seed(int(seed))
    glorot_init(net, generator=gen)
    # delta heads restart at the identity mapping
    for conv in (net.refine.delta, net.combine.delta, net.superres.fuse):
        zero_init(conv)
    return net


# ---------------------------------------------------------------------------
# correspondence math (long-range connection to the first colorized frame)
# ---------------------------------------------------------------------------

def _pool2(x):
    return nn.functional.avg_pool2d(x, kernel_size=2)


def similarity_matrix(f1, fi):
    """Cosine similarity between all position pairs of two feature pyramids.

    Pyramids ((H/2) x (W/2) x C, numpy or torch) are pooled once more to
    quarter resolution; each position's feature vector is centered by its
    channel mean and L2-normalized, so entries land in [-1, 1]. Rows index
    reference (first-frame) positions, columns the current frame.
    """
    is_np = not torch.is_tensor(f1)
    t1 = torch.from_numpy(np.ascontiguousarray(f1)) if is_np else f1
    t2 = torch.from_numpy(np.ascontiguousarray(fi)) if not torch.is_tensor(fi) else fi
    if t1.shape != t2.shape:
        raise ValidationError(f"pyramid shapes differ: {tuple(t1.shape)} vs {tuple(t2.shape)}")
    out = _similarity_from_nchw(
        t1.permute(2, 0, 1).unsqueeze(0), t2.permute(2, 0, 1).unsqueeze(0)
    )
    return out.numpy() if is_np else out


def _normalize_positions(f, eps=1e-8):
    flat = f.flatten(2).squeeze(0).transpose(0, 1)  # N x C
    centered = flat - flat.mean(dim=1, keepdim=True)
    return centered / (centered.norm(dim=1, keepdim=True) + eps)


def _similarity_from_nchw(f1, fi):
    n1 = _normalize_positions(_pool2(f1))
    n2 = _normalize_positions(_pool2(fi))
    return n1 @ n2.transpose(0, 1)


def correspondence_warp(sim, y1_ab, tau=DEFAULT_TEMPERATURE):
    """Attention-warp the first frame's chrominance to the current frame.

    ``sim`` is the N x N similarity matrix, ``y1_ab`` the first-frame
    chrominance already at quarter resolution (h/4 x w/4 x 2). Attention is a
    softmax over reference positions per current position, so every output
    pixel is a convex combination of reference values; the result is
    upsampled back to the processing resolution.
    """
    if tau <= 0:
        raise ValidationError(f"tau must be positive, got {tau}")
    is_np = not torch.is_tensor(y1_ab)
    y = torch.from_numpy(np.ascontiguousarray(y1_ab)) if is_np else y1_ab
    s = torch.from_numpy(np.ascontiguousarray(sim)) if not torch.is_tensor(sim) else sim
    h4, w4 = y.shape[:2]
    if s.shape != (h4 * w4, h4 * w4):
        raise ValidationError(
            f"similarity {tuple(s.shape)} inconsistent with quarter-res chrominance {h4}x{w4}"
        )
    weights = torch.softmax(tau * s.to(y.dtype), dim=0)  # over reference positions
    flat = y.reshape(h4 * w4, 2)
    warped = weights.transpose(0, 1) @ flat
    quarter = warped.reshape(h4, w4, 2).permute(2, 0, 1).unsqueeze(0)
    full = nn.functional.interpolate(quarter, scale_factor=4, mode="bilinear", align_corners=False)
    out = full.squeeze(0).permute(1, 2, 0)
    return out.numpy() if is_np else out


# ---------------------------------------------------------------------------
# numpy-facing single-call wrappers
# ---------------------------------------------------------------------------

def _np_to_planes(arr, dtype):
    return torch.from_numpy(np.ascontiguousarray(arr)).to(dtype).permute(2, 0, 1).unsqueeze(0)


def refine(warped_ab, mask, net: RefineNet):
    """Numpy inference wrapper: warped_ab H x W x 2, mask H x W."""
    dtype = next(net.parameters()).dtype
    ab = _np_to_planes(warped_ab, dtype)
    m = torch.from_numpy(np.ascontiguousarray(mask)).to(dtype)[None, None]
    with torch.no_grad():
        out = net(ab, m)
    return out.squeeze(0).permute(1, 2, 0).numpy().astype(np.float64)


def combine(current_ab, refined_neighbors, refined_prev, corresp, net: CombineNet):
    dtype = next(net.parameters()).dtype
    with torch.no_grad():
        out = net(
            _np_to_planes(current_ab, dtype),
            [_np_to_planes(r, dtype) for r in refined_neighbors],
            _np_to_planes(refined_prev, dtype),
            _np_to_planes(corresp, dtype),
        )
    return out.squeeze(0).permute(1, 2, 0).numpy().astype(np.float64)


def super_resolve(d_ab, gray_full, ratio, net: SuperResNet):
    dtype = next(net.parameters()).dtype
    g = torch.from_numpy(np.ascontiguousarray(gray_full)).to(dtype)[None, None]
    with torch.no_grad():
        out = net(_np_to_planes(d_ab, dtype), g, ratio)
    return out.squeeze(0).permute(1, 2, 0).numpy().astype(np.float64)


__all__ = [
    "SHORT_RANGE_OFFSETS",
    "SR_RATIOS",
    "DEFAULT_TEMPERATURE",
    "SsnetConfig",
    "RefineNet",
    "CombineNet",
    "SuperResNet",
    "TemporalSmoother",
    "init_ssnet",
    "similarity_matrix",
    "correspondence_warp",
    "refine",
    "combine",
    "super_resolve",
    "build_feature_pyramid",
    "FrozenEncoder",
    "pyramid_from_nchw",
]
