"""Per-frame scribble colorizer: pyramid encoder over (gray + scribble map),
frozen semantic encoder, residual bottleneck fusion, and two decoder heads
producing chrominance planes and a soft segmentation map."""

from dataclasses import dataclass

import numpy as np
import torch
import torch.nn as nn

from ..errors import ValidationError
from .blocks import ResBlock, conv_block, glorot_init, upsample2
from .encoder import FrozenEncoder


@dataclass
class CpnetConfig:
    base_channels: int = 16
    depth: int = 5
    semantic_encoder_seed: int = 0
    bottleneck_blocks: int = 4
    semantic_base: int = 8

    def encoder_widths(self):
        c = self.base_channels
        return [min(c * 2**i, 8 * c) for i in range(self.depth + 1)]


class ColorPropNet(nn.Module):
    """Two-encoder, two-decoder colorization network.

    Inputs are the luminance plane plus the 3-plane scribble map; outputs are
    sigmoid-bounded chrominance (2 planes) and segmentation (1 plane) at input
    resolution. The semantic encoder is frozen; everything else trains.
    """

    def __init__(self, config: CpnetConfig, semantic_encoder: FrozenEncoder = None):
        super().__init__()
        self.config = config
        widths = config.encoder_widths()
        depth = config.depth

        self.stem = nn.Sequential(conv_block(4, widths[0]), conv_block(widths[0], widths[0]))
        self.downs = nn.ModuleList(
            nn.Sequential(
                conv_block(widths[i], widths[i + 1], stride=2),
                conv_block(widths[i + 1], widths[i + 1]),
            )
            for i in range(depth)
        )
        self.semantic = (
            semantic_encoder
            if semantic_encoder is not None
            else FrozenEncoder(config.semantic_encoder_seed, base=config.semantic_base, stages=depth)
        )
        sem_bottom = self.semantic.widths[depth - 1]
        self.fuse = conv_block(widths[depth] + sem_bottom, widths[depth])
        self.bottleneck = nn.Sequential(
            *[ResBlock(widths[depth]) for _ in range(config.bottleneck_blocks)]
        )
        self.ups = nn.ModuleList(
            conv_block(widths[i + 1] + widths[i], widths[i]) for i in reversed(range(depth))
        )
        self.color_head = nn.Conv2d(widths[0], 2, 3, 1, 1)
        # segmentation branch fuses the last three decoder scales; the 1x1
        # fusion keeps full-resolution arithmetic cheap
        seg_in = widths[0] + widths[1] + widths[2]
        self.seg_branch = nn.Sequential(
            nn.Conv2d(seg_in, widths[0], 1),
            nn.LeakyReLU(0.2, inplace=True),
            nn.Conv2d(widths[0], 1, 3, 1, 1),
        )

    def forward(self, gray, scribbles):
        """gray (N,1,H,W), scribbles (N,3,H,W) -> (color (N,2,H,W), seg (N,1,H,W))."""
        h, w = gray.shape[2], gray.shape[3]
        stride = 2**self.config.depth
        if h % stride or w % stride:
            raise ValidationError(f"resolution {h}x{w} not divisible by {stride}")
        if gray.shape[2:] != scribbles.shape[2:]:
            raise ValidationError("gray and scribble map resolutions differ")

        x = torch.cat([gray, scribbles], dim=1)
        skips = [self.stem(x)]
        for down in self.downs:
            skips.append(down(skips[-1]))

        sem_feats = self.semantic(gray.expand(-1, 3, -1, -1))
        bottom = self.fuse(torch.cat([skips[-1], sem_feats[self.config.depth - 1]], dim=1))
        y = self.bottleneck(bottom)

        decoder_feats = []
        for k, up in enumerate(self.ups):
            y = up(torch.cat([upsample2(y), skips[-2 - k]], dim=1))
            decoder_feats.append(y)

        color = torch.sigmoid(self.color_head(y))

        last3 = decoder_feats[-3:]
        full = last3[-1].shape[2:]
        fused = torch.cat(
            [
                f
                if f.shape[2:] == full
                else nn.functional.interpolate(f, size=full, mode="bilinear", align_corners=False)
                for f in last3
            ],
            dim=1,
        )
        seg = torch.sigmoid(self.seg_branch(fused))
        return color, seg

    def trainable_parameters(self):
        return [p for p in self.parameters() if p.requires_grad]

    def frozen_parameters(self):
        return [p for p in self.parameters() if not p.requires_grad]


def init_cpnet(config: CpnetConfig, seed=0, semantic_encoder=None) -> ColorPropNet:
    """Build a colorizer with fan-based init; the semantic encoder weights come
    from ``config.semantic_encoder_seed`` and are flagged frozen."""
    net = ColorPropNet(config, semantic_encoder=semantic_encoder)
    frozen = {id(p) for p in net.semantic.parameters()}
    gen = torch.Generator().manual_seed(int(seed))
    for m in net.modules():
        if isinstance(m, nn.Conv2d) and id(m.weight) not in frozen:
            glorot_init(m, generator=gen)
    return net


def cpnet_forward(gray, scribble_map, net: ColorPropNet):
    """Single-frame numpy inference: gray H x W, scribble map H x W x 3."""
    dtype = next(net.parameters()).dtype
    g = torch.from_numpy(np.ascontiguousarray(gray)).to(dtype)[None, None]
    s = torch.from_numpy(np.ascontiguousarray(scribble_map)).to(dtype).permute(2, 0, 1)[None]
    with torch.no_grad():
        color, seg = net(g, s)
    return (
        color.squeeze(0).permute(1, 2, 0).numpy().astype(np.float64),
        seg.squeeze(0).squeeze(0).numpy().astype(np.float64),
    )
