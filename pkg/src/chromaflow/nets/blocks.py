"""Shared building blocks: conv stacks, residual blocks, RRDB, bounded heads."""

import math

import torch
import torch.nn as nn

LEAKY_SLOPE = 0.2


def conv_block(cin, cout, stride=1, norm=False):
    layers = [nn.Conv2d(cin, cout, 3, stride, 1)]
    if norm:
        layers.append(nn.InstanceNorm2d(cout, affine=True))
    layers.append(nn.LeakyReLU(LEAKY_SLOPE, inplace=True))
    return nn.Sequential(*layers)


class ResBlock(nn.Module):
    def __init__(self, channels):
        super().__init__()
        self.conv1 = nn.Conv2d(channels, channels, 3, 1, 1)
        self.conv2 = nn.Conv2d(channels, channels, 3, 1, 1)
        self.act = nn.LeakyReLU(LEAKY_SLOPE, inplace=True)

    def forward(self, x):
        return x + self.conv2(self.act(self.conv1(x)))


class ResidualDenseBlock(nn.Module):
    def __init__(self, channels, growth):
        super().__init__()
        self.conv1 = nn.Conv2d(channels, growth, 3, 1, 1)
        self.conv2 = nn.Conv2d(channels + growth, growth, 3, 1, 1)
        self.conv3 = nn.Conv2d(channels + 2 * growth, channels, 3, 1, 1)
        self.act = nn.LeakyReLU(LEAKY_SLOPE, inplace=True)

    def forward(self, x):
        x1 = self.act(self.conv1(x))
        x2 = self.act(self.conv2(torch.cat((x, x1), 1)))
        x3 = self.conv3(torch.cat((x, x1, x2), 1))
        return x + 0.2 * x3


class RRDB(nn.Module):
    """Residual-in-residual stack of dense blocks."""

    def __init__(self, channels, growth):
        super().__init__()
        self.rdb1 = ResidualDenseBlock(channels, growth)
        self.rdb2 = ResidualDenseBlock(channels, growth)

    def forward(self, x):
        return x + 0.2 * self.rdb2(self.rdb1(x))


def bounded_residual(base, delta, eps=1e-4):
    """Apply an additive correction to a [0,1] image in pre-sigmoid space.

    Output stays strictly inside (0, 1) via the sigmoid, equals ``base`` where
    ``delta`` is zero, and keeps useful gradients near the bounds.
    """
    safe = base.clamp(eps, 1.0 - eps)
    return torch.sigmoid(torch.log(safe / (1.0 - safe)) + delta)


def upsample2(x):
    return nn.functional.interpolate(x, scale_factor=2, mode="bilinear", align_corners=False)


def glorot_init(module, generator=None):
    """Fan-based uniform init for every conv weight; biases zeroed."""
    for m in module.modules():
        if isinstance(m, nn.Conv2d):
            fan_in = m.in_channels * m.kernel_size[0] * m.kernel_size[1]
            fan_out = m.out_channels * m.kernel_size[0] * m.kernel_size[1]
            bound = math.sqrt(6.0 / (fan_in + fan_out))
            with torch.no_grad():
                m.weight.uniform_(-bound, bound, generator=generator)
                if m.bias is not None:
                    m.bias.zero_()
        elif isinstance(m, nn.InstanceNorm2d) and m.affine:
            with torch.no_grad():
                m.weight.fill_(1.0)
                m.bias.zero_()


def zero_init(conv):
    """Zero a delta-producing conv so its residual head starts as the identity."""
    with torch.no_grad():
        conv.weight.zero_()
        if conv.bias is not None:
            conv.bias.zero_()
    return conv
