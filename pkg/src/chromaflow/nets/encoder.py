"""Frozen random-weight feature backbone.

Stands in for a pretrained semantic extractor at desk scale: a fixed
convolutional pyramid whose weights are a pure function of a seed, so features
are reproducible from checkpoint metadata alone. The same instance serves both
the per-frame colorizer's semantic branch and the long-range correspondence
pyramid; swapping in real pretrained weights only needs this seam.
"""

import numpy as np
import torch
import torch.nn as nn

from ..errors import ValidationError
from .blocks import LEAKY_SLOPE, glorot_init


def _stage_widths(base, stages):
    return [base, base * 3 // 2, base * 2, base * 3, base * 4][:stages]


class FrozenEncoder(nn.Module):
    """Fixed 3-plane-input conv pyramid; stage s output is at resolution /2^(s+1)."""

    def __init__(self, seed=0, base=8, stages=5):
        super().__init__()
        self.seed = int(seed)
        self.base = int(base)
        widths = _stage_widths(base, stages)
        self.widths = widths
        blocks = []
        cin = 3
        for w in widths:
            blocks.append(
                nn.Sequential(
                    nn.Conv2d(cin, w, 3, 2, 1),
                    nn.LeakyReLU(LEAKY_SLOPE, inplace=True),
                    nn.Conv2d(w, w, 3, 1, 1),
                    nn.LeakyReLU(LEAKY_SLOPE, inplace=True),
                )
            )
            cin = w
        self.stages = nn.ModuleList(blocks)
        glorot_init(self, generator=torch.Generator().manual_seed(self.seed))
        for p in self.parameters():
            p.requires_grad_(False)

    def forward(self, x):
        """Return the list of per-stage feature maps for (N, 3, H, W) input."""
        feats = []
        for stage in self.stages:
            x = stage(x)
            feats.append(x)
        return feats

    @property
    def pyramid_channels(self):
        return sum(self.widths[:4])


def _to_nchw3(img):
    """Accept H x W (replicated to 3 planes) or H x W x 3, numpy or torch."""
    is_np = not torch.is_tensor(img)
    t = torch.from_numpy(np.ascontiguousarray(img)) if is_np else img
    if t.ndim == 2:
        t = t.unsqueeze(-1).expand(*t.shape, 3)
    if t.ndim != 3 or t.shape[2] != 3:
        raise ValidationError(f"expected H x W or H x W x 3 image, got {tuple(t.shape)}")
    return t.permute(2, 0, 1).unsqueeze(0), is_np


def pyramid_from_nchw(encoder, x):
    """Torch-native pyramid: first four stages resized to half resolution and
    concatenated along channels."""
    h, w = x.shape[2], x.shape[3]
    if h % 16 or w % 16:
        raise ValidationError(f"pyramid input resolution {h}x{w} not divisible by 16")
    feats = encoder(x)[:4]
    half = (h // 2, w // 2)
    resized = [
        f
        if f.shape[2:] == half
        else nn.functional.interpolate(f, size=half, mode="bilinear", align_corners=False)
        for f in feats
    ]
    return torch.cat(resized, dim=1)


def build_feature_pyramid(img, encoder):
    """Multi-scale features of one image as an (H/2) x (W/2) x C array.

    Grayscale inputs are replicated across the encoder's three input planes.
    """
    nchw, is_np = _to_nchw3(img)
    dtype = next(encoder.parameters()).dtype
    with torch.no_grad():
        pyr = pyramid_from_nchw(encoder, nchw.to(dtype))
    out = pyr.squeeze(0).permute(1, 2, 0)
    return out.numpy() if is_np else out
