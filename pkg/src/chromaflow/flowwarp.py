"""Backward warping, occlusion masks, and flow-field utilities.

All functions accept either numpy arrays or torch tensors and return the same
kind; torch inputs stay on the autograd tape. Array layout is H x W for
single-plane images, H x W x C for multi-plane, H x W x 2 for flow fields
(channel order dx, dy, units of pixels).

The flow convention throughout: a forward flow for step t satisfies
``frame_{t+1}(p + flow(p)) == frame_t(p)``, i.e. it backward-warps the later
frame onto the earlier frame's grid and forward-splats content from t to t+1.
"""

import os

import numpy as np
import torch

from .errors import ValidationError
from .svcf import read_svcf

# sensitivity of the occlusion mask on [0,1]-normalized luminance
DEFAULT_MASK_SHARPNESS = 200.0


def _to_tensor(x):
    if torch.is_tensor(x):
        return x, False
    return torch.from_numpy(np.ascontiguousarray(x)), True


def _warp_core(src, flow):
    """Bilinear backward warp of (B, C, H, W) by flow (B, H, W, 2), border-replicated."""
    b, c, h, w = src.shape
    ys, xs = torch.meshgrid(
        torch.arange(h, dtype=src.dtype), torch.arange(w, dtype=src.dtype), indexing="ij"
    )
    px = xs + flow[..., 0]
    py = ys + flow[..., 1]
    x0f = px.floor()
    y0f = py.floor()
    wx = (px - x0f).unsqueeze(1)
    wy = (py - y0f).unsqueeze(1)
    x0 = x0f.long().clamp(0, w - 1)
    x1 = (x0f.long() + 1).clamp(0, w - 1)
    y0 = y0f.long().clamp(0, h - 1)
    y1 = (y0f.long() + 1).clamp(0, h - 1)

    flat = src.reshape(b, c, h * w)

    def gather(yy, xx):
        idx = (yy * w + xx).reshape(b, 1, h * w).expand(b, c, h * w)
        return torch.gather(flat, 2, idx).reshape(b, c, h, w)

    top = gather(y0, x0) * (1 - wx) + gather(y0, x1) * wx
    bottom = gather(y1, x0) * (1 - wx) + gather(y1, x1) * wx
    return top * (1 - wy) + bottom * wy


def _check_flow(flow, name="flow"):
    if flow.ndim != 3 or flow.shape[2] != 2:
        raise ValidationError(f"{name}: expected H x W x 2, got shape {tuple(flow.shape)}")


def warp_backward(src, flow):
    """Sample ``src`` at p + flow(p): output(p) = bilinear(src, p + flow(p)).

    Out-of-bounds samples replicate the border. ``src`` may be H x W or
    H x W x C; the output has the same shape.
    """
    src_t, src_np = _to_tensor(src)
    flow_t, _ = _to_tensor(flow)
    _check_flow(flow_t)
    if src_t.ndim not in (2, 3):
        raise ValidationError(f"src: expected 2-D or 3-D array, got shape {tuple(src_t.shape)}")
    if tuple(src_t.shape[:2]) != tuple(flow_t.shape[:2]):
        raise ValidationError(
            f"src spatial dims {tuple(src_t.shape[:2])} != flow dims {tuple(flow_t.shape[:2])}"
        )
    squeeze = src_t.ndim == 2
    planes = src_t.unsqueeze(-1) if squeeze else src_t
    nchw = planes.permute(2, 0, 1).unsqueeze(0)
    out = _warp_core(nchw, flow_t.to(nchw.dtype).unsqueeze(0))
    out = out.squeeze(0).permute(1, 2, 0)
    if squeeze:
        out = out.squeeze(-1)
    return out.numpy() if src_np else out


def warp_backward_batch(src, flow):
    """NCHW/torch variant of :func:`warp_backward` for use inside networks."""
    return _warp_core(src, flow.to(src.dtype))


def occlusion_mask(warped_gray, target_gray, alpha=DEFAULT_MASK_SHARPNESS):
    """Per-pixel warp confidence exp(-alpha * (warped - target)^2), in (0, 1].

    Equals 1 exactly where the warped and target luminances agree; larger
    ``alpha`` sharpens the falloff.
    """
    if alpha <= 0:
        raise ValidationError(f"alpha must be positive, got {alpha}")
    if tuple(warped_gray.shape) != tuple(target_gray.shape):
        raise ValidationError(
            f"shape mismatch: {tuple(warped_gray.shape)} vs {tuple(target_gray.shape)}"
        )
    diff2 = (warped_gray - target_gray) ** 2
    if torch.is_tensor(diff2):
        return torch.exp(-alpha * diff2)
    return np.exp(-alpha * diff2)


def compose_flows(f_a2b, f_b2c):
    """Chain two flows: f_a2c(p) = f_a2b(p) + f_b2c sampled at p + f_a2b(p)."""
    _check_flow(np.asarray(f_a2b) if not torch.is_tensor(f_a2b) else f_a2b, "f_a2b")
    if tuple(f_a2b.shape) != tuple(f_b2c.shape):
        raise ValidationError(f"flow shapes differ: {tuple(f_a2b.shape)} vs {tuple(f_b2c.shape)}")
    return f_a2b + warp_backward(f_b2c, f_a2b)


def rescale_flow(flow, new_hw):
    """Bilinearly resize a flow field, scaling displacements by the resize ratio."""
    new_h, new_w = new_hw
    if new_h < 1 or new_w < 1:
        raise ValidationError(f"target resolution must be positive, got {new_hw}")
    flow_t, was_np = _to_tensor(flow)
    _check_flow(flow_t)
    h, w = flow_t.shape[:2]
    if (h, w) == (new_h, new_w):
        out = flow_t.clone()
    else:
        resized = torch.nn.functional.interpolate(
            flow_t.permute(2, 0, 1).unsqueeze(0),
            size=(new_h, new_w),
            mode="bilinear",
            align_corners=False,
        ).squeeze(0).permute(1, 2, 0)
        scale = torch.tensor([new_w / w, new_h / h], dtype=resized.dtype)
        out = resized * scale
    return out.numpy() if was_np else out


def invert_flow(flow, iterations=3):
    """Approximate the reverse-direction flow by fixed-point iteration.

    Solves v(q) = -flow(q + v(q)); exact for spatially uniform flows after the
    first iteration, accurate to O(|flow|^2 * curvature) otherwise.
    """
    v = -flow
    for _ in range(iterations):
        v = -warp_backward(flow, v)
    return v


def mirror_flow_horizontal(flow):
    """Flow field of the horizontally mirrored scene: flip columns, negate dx."""
    flipped = flow[:, ::-1].copy() if not torch.is_tensor(flow) else flow.flip(1).clone()
    flipped[..., 0] = -flipped[..., 0]
    return flipped


def horizontal_mirror_field(hw, dtype=np.float32):
    """Flow that backward-warps a frame onto its own horizontal mirror."""
    h, w = hw
    flow = np.zeros((h, w, 2), dtype=dtype)
    flow[..., 0] = (w - 1) - 2.0 * np.arange(w)[None, :]
    return flow


class FlowProvider:
    """Source of alignment flows between arbitrary frame pairs of one clip.

    ``between(j, i)`` returns the flow that backward-warps frame j onto frame
    i's pixel grid; ``step_forward(t)`` returns the forward flow of step
    t -> t+1 used for splatting scribbles forward in time.
    """

    def between(self, j, i, hw=None):
        raise NotImplementedError

    def step_forward(self, t, hw=None):
        raise NotImplementedError


class ZeroFlow(FlowProvider):
    def __init__(self, hw):
        self.hw = tuple(hw)

    def _zeros(self, hw):
        h, w = hw or self.hw
        return np.zeros((h, w, 2), dtype=np.float32)

    def between(self, j, i, hw=None):
        return self._zeros(hw)

    def step_forward(self, t, hw=None):
        return self._zeros(hw)


class GroundTruthFlow(FlowProvider):
    """Composes per-step forward flows into multi-step alignment flows.

    Frames later than the target are chained forward; frames earlier than the
    target go through :func:`invert_flow` first. Composed results are cached.
    """

    def __init__(self, flows_forward):
        if not flows_forward:
            raise ValidationError("GroundTruthFlow requires at least one forward flow")
        self.flows = [np.asarray(f, dtype=np.float32) for f in flows_forward]
        self.hw = self.flows[0].shape[:2]
        self._cache = {}

    def _inverse(self, t):
        key = ("inv", t)
        if key not in self._cache:
            self._cache[key] = invert_flow(self.flows[t])
        return self._cache[key]

    def between(self, j, i, hw=None):
        n_frames = len(self.flows) + 1
        if not (0 <= j < n_frames and 0 <= i < n_frames):
            raise ValidationError(f"frame indices ({j}, {i}) outside clip of {n_frames} frames")
        key = (j, i)
        if key not in self._cache:
            if j == i:
                flow = np.zeros((*self.hw, 2), dtype=np.float32)
            elif j > i:
                flow = self.flows[i]
                for t in range(i + 1, j):
                    flow = compose_flows(flow, self.flows[t])
            else:
                flow = self._inverse(i - 1)
                for t in range(i - 2, j - 1, -1):
                    flow = compose_flows(flow, self._inverse(t))
            self._cache[key] = flow
        flow = self._cache[key]
        if hw is not None and tuple(hw) != self.hw:
            flow = rescale_flow(flow, hw)
        return flow

    def step_forward(self, t, hw=None):
        if not (0 <= t < len(self.flows)):
            raise ValidationError(f"no forward flow for step {t}")
        flow = self.flows[t]
        if hw is not None and tuple(hw) != self.hw:
            flow = rescale_flow(flow, hw)
        return flow


class FileFlow(GroundTruthFlow):
    """Ground-truth-style provider fed from flow_%05d.svcf files in a directory."""

    def __init__(self, directory):
        flows = []
        t = 0
        while True:
            path = os.path.join(directory, f"flow_{t:05d}.svcf")
            if not os.path.exists(path):
                break
            flows.append(read_svcf(path))
            t += 1
        if not flows:
            raise ValidationError(f"no flow_*.svcf files found in {directory}")
        super().__init__(flows)
