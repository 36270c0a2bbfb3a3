"""Full-clip colorization: scribble propagation, per-frame colorization, and
the sequential temporal-smoothing pass, plus the arithmetic-cost audit."""

from dataclasses import dataclass, field

import numpy as np
import torch

from .colorspace import lab_to_rgb
from .errors import ValidationError
from .flowwarp import DEFAULT_MASK_SHARPNESS, occlusion_mask, warp_backward_batch
from .imageops import resize_plane
from .nets.encoder import pyramid_from_nchw
from .nets.ssnet import SHORT_RANGE_OFFSETS, _similarity_from_nchw
from .scribble import empty_scribble_map, propagate_scribbles, rasterize


def _plane_to_nchw(arr, dtype):
    t = torch.from_numpy(np.ascontiguousarray(arr)) if not torch.is_tensor(arr) else arr
    t = t.to(dtype)
    if t.ndim == 4:  # already N,C,H,W
        return t
    if t.ndim == 2:
        return t[None, None]
    return t.permute(2, 0, 1).unsqueeze(0)


def _nchw_to_plane(t):
    t = t.detach().squeeze(0)
    if t.shape[0] == 1:
        return t.squeeze(0).numpy().astype(np.float64)
    return t.permute(1, 2, 0).numpy().astype(np.float64)


class SmoothingRun:
    """Sequential smoothing pass over one clip.

    Holds the per-clip constants (reference pyramid, quarter-res reference
    chrominance, alignment flows) and steps frame by frame, feeding each
    frame's aggregated output into the next step. Differentiable end to end
    except for the similarity matrix (frozen features) and the previous-output
    recurrence, which is detached to keep training memory flat.
    """

    def __init__(
        self,
        state,
        grays_low,
        y_ab,
        flow_provider,
        tau=None,
        alpha=DEFAULT_MASK_SHARPNESS,
        ablate_temporal=False,
        aux_cache=None,
    ):
        smoother = state.smoother
        self.smoother = smoother
        self.encoder = state.encoder
        self.alpha = alpha
        self.ablate_temporal = ablate_temporal
        self.tau = tau if tau is not None else smoother.config.tau
        self.dtype = next(smoother.parameters()).dtype
        self.n_frames = len(grays_low)
        if any(y is None for y in y_ab) or len(y_ab) != self.n_frames:
            raise ValidationError("smoothing requires a colorizer output for every frame")
        self.grays = [_plane_to_nchw(g, self.dtype) for g in grays_low]
        self.y = [y if torch.is_tensor(y) else _plane_to_nchw(y, self.dtype) for y in y_ab]
        self.provider = flow_provider
        self.hw = tuple(self.grays[0].shape[2:])
        # flows, occlusion masks, and frame pyramids depend only on the clip,
        # so a training loop revisiting one batch can hand in a shared cache
        self.cache = aux_cache if aux_cache is not None else {}
        for key in ("flow", "mask", "pyr"):
            self.cache.setdefault(key, {})

        y1 = self.y[0]
        with torch.no_grad():
            rgb1 = lab_to_rgb(
                self.grays[0][0, 0].numpy().astype(np.float64), _nchw_to_plane(y1)
            )
            self.f1 = pyramid_from_nchw(
                self.encoder, _plane_to_nchw(rgb1, self.dtype)
            )
        self.y1_quarter = torch.nn.functional.interpolate(y1, scale_factor=0.25, mode="area")
        self.d_prev = None
        self._next = 0

    def _flow_to(self, j, i):
        key = (j, i)
        if key not in self.cache["flow"]:
            if j == i:
                flow = np.zeros((*self.hw, 2), dtype=np.float32)
            else:
                flow = self.provider.between(j, i, hw=self.hw)
            self.cache["flow"][key] = (
                torch.from_numpy(np.ascontiguousarray(flow)).to(self.dtype).unsqueeze(0)
            )
        return self.cache["flow"][key]

    def _mask_for(self, j, i, flow):
        key = (j, i)
        if key not in self.cache["mask"]:
            with torch.no_grad():
                warped_gray = warp_backward_batch(self.grays[j], flow)
                self.cache["mask"][key] = occlusion_mask(
                    warped_gray, self.grays[i], alpha=self.alpha
                )
        return self.cache["mask"][key]

    def _refined_stream(self, ab, j, i):
        flow = self._flow_to(j, i)
        warped = warp_backward_batch(ab, flow)
        return self.smoother.refine(warped, self._mask_for(j, i, flow))

    def _frame_pyramid(self, i):
        if i not in self.cache["pyr"]:
            with torch.no_grad():
                gray3 = self.grays[i].expand(-1, 3, -1, -1)
                self.cache["pyr"][i] = pyramid_from_nchw(self.encoder, gray3)
        return self.cache["pyr"][i]

    def _correspondence(self, i):
        with torch.no_grad():
            sim = _similarity_from_nchw(self.f1, self._frame_pyramid(i))
        weights = torch.softmax(self.tau * sim, dim=0)
        h4, w4 = self.y1_quarter.shape[2:]
        flat = self.y1_quarter.squeeze(0).reshape(2, h4 * w4).transpose(0, 1)
        warped = (weights.transpose(0, 1) @ flat).transpose(0, 1).reshape(1, 2, h4, w4)
        return torch.nn.functional.interpolate(
            warped, scale_factor=4, mode="bilinear", align_corners=False
        )

    def step(self, i):
        """Produce the smoothed processing-resolution chrominance for frame i."""
        if i != self._next:
            raise ValidationError(f"smoothing steps must run in order (expected {self._next}, got {i})")
        zeros = torch.zeros_like(self.y[i])
        neighbors = []
        for off in SHORT_RANGE_OFFSETS:
            j = i + off
            if self.ablate_temporal:
                neighbors.append(zeros)
            elif 0 <= j < self.n_frames:
                neighbors.append(self._refined_stream(self.y[j], j, i))
            else:
                # out-of-range neighbors clamp to the nearest frame, unwarped
                j = min(max(j, 0), self.n_frames - 1)
                mask = torch.ones_like(self.grays[i])
                neighbors.append(self.smoother.refine(self.y[j], mask))
        if i == 0:
            prev_stream = self.y[0]
        else:
            prev_stream = self._refined_stream(self.d_prev, i - 1, i)
        corresp = zeros if self.ablate_temporal else self._correspondence(i)
        d = self.smoother.combine(self.y[i], neighbors, prev_stream, corresp)
        self.d_prev = d.detach()
        self._next = i + 1
        return d

    def step_with_superres(self, i, gray_full, sr_ratio=None):
        d = self.step(i)
        gf = _plane_to_nchw(gray_full, self.dtype)
        ratio = sr_ratio if sr_ratio is not None else self.smoother.config.sr_ratio
        z = self.smoother.superres(d, gf, ratio)
        return d, z


def ssnet_forward(run: SmoothingRun, i, gray_full, sr_ratio=None):
    """Spec-shaped single-frame entry point over a prepared :class:`SmoothingRun`."""
    d, z = run.step_with_superres(i, gray_full, sr_ratio)
    return _nchw_to_plane(d), _nchw_to_plane(z)


@dataclass
class ClipResult:
    y_ab: list = field(default_factory=list)  # per-frame colorizer output, processing res
    seg: list = field(default_factory=list)
    d_ab: list = field(default_factory=list)  # smoothed chrominance, processing res
    z_ab: list = field(default_factory=list)  # final chrominance, output res
    scribble_maps: list = field(default_factory=list)


def colorize_clip(
    state,
    grays_full,
    scribble_points,
    flow_provider,
    sr_ratio=None,
    scribble_radius=2,
    alpha=DEFAULT_MASK_SHARPNESS,
    progress=None,
):
    """Run the whole pipeline on grayscale frames given first-frame scribbles.

    ``grays_full`` are full-resolution luminance planes; processing happens at
    1/sr_ratio of that. ``scribble_points`` may be a point list or an already
    rasterized scribble map at processing resolution. Returns a
    :class:`ClipResult`; ``progress`` (if given) is called with the number of
    finished frames after each frame.
    """
    ratio = int(sr_ratio) if sr_ratio is not None else state.ssnet_config.sr_ratio
    full_hw = tuple(np.asarray(grays_full[0]).shape)
    if full_hw[0] % ratio or full_hw[1] % ratio:
        raise ValidationError(f"frame resolution {full_hw} not divisible by sr_ratio {ratio}")
    low_hw = (full_hw[0] // ratio, full_hw[1] // ratio)
    stride = 2**state.cpnet_config.depth
    if low_hw[0] % stride or low_hw[1] % stride:
        raise ValidationError(
            f"processing resolution {low_hw} not divisible by {stride}; pick another sr_ratio"
        )

    grays_low = [resize_plane(np.asarray(g, dtype=np.float64), low_hw, mode="area") for g in grays_full]

    if isinstance(scribble_points, np.ndarray):
        smap = scribble_points
        if smap.shape[:2] != low_hw:
            raise ValidationError(
                f"scribble map resolution {smap.shape[:2]} != processing resolution {low_hw}"
            )
    elif scribble_points:
        smap = rasterize(scribble_points, low_hw, radius=scribble_radius)
    else:
        smap = empty_scribble_map(low_hw)

    state.eval()
    result = ClipResult()
    dtype = next(state.colorizer.parameters()).dtype

    with torch.no_grad():
        current_map = smap
        y_list = []
        for t, gray in enumerate(grays_low):
            if t > 0:
                current_map = propagate_scribbles(
                    current_map, np.asarray(flow_provider.step_forward(t - 1, hw=low_hw))
                )
            result.scribble_maps.append(current_map)
            g = _plane_to_nchw(gray, dtype)
            s = _plane_to_nchw(current_map, dtype)
            color, seg = state.colorizer(g, s)
            y_list.append(color)
            result.y_ab.append(_nchw_to_plane(color))
            result.seg.append(_nchw_to_plane(seg))

        run = SmoothingRun(state, grays_low, y_list, flow_provider, alpha=alpha)
        for i in range(len(grays_low)):
            d, z = run.step_with_superres(i, grays_full[i], sr_ratio=ratio)
            result.d_ab.append(_nchw_to_plane(d))
            result.z_ab.append(_nchw_to_plane(z))
            if progress is not None:
                progress(i + 1)
    return result


# ---------------------------------------------------------------------------
# arithmetic-cost audit
# ---------------------------------------------------------------------------

def count_macs(state, processing_hw, sr_ratio, alpha=DEFAULT_MASK_SHARPNESS):
    """Multiply-accumulate counts per pipeline stage for one frame.

    Convolutions are counted through forward hooks; the correspondence
    matmul/attention terms are added analytically. Everything except
    "superres" depends only on the processing resolution, never on the output
    resolution.
    """
    h, w = processing_hw
    counts = {}
    hooks = []

    def make_hook(group):
        def hook(module, inputs, output):
            k = module.kernel_size[0] * module.kernel_size[1]
            counts[group] = counts.get(group, 0) + (
                output.shape[2] * output.shape[3] * k * module.in_channels * module.out_channels
            )

        return hook

    groups = {
        "colorizer": state.colorizer,
        "encoder": state.encoder,
        "refine": state.smoother.refine,
        "combine": state.smoother.combine,
        "superres": state.smoother.superres,
    }
    seen = set()
    for group, module in groups.items():
        for m in module.modules():
            if isinstance(m, torch.nn.Conv2d) and id(m) not in seen:
                seen.add(id(m))
                hooks.append(m.register_forward_hook(make_hook(group)))

    dtype = next(state.colorizer.parameters()).dtype
    gray = torch.zeros(1, 1, h, w, dtype=dtype)
    smap = torch.zeros(1, 3, h, w, dtype=dtype)
    try:
        with torch.no_grad():
            color, _ = state.colorizer(gray, smap)
            mask = torch.ones_like(gray)
            refined = state.smoother.refine(color, mask)
            fi = pyramid_from_nchw(state.encoder, gray.expand(-1, 3, -1, -1))
            neighbors = [refined] * len(SHORT_RANGE_OFFSETS)
            state.smoother.combine(color, neighbors, refined, color)
            gray_full = torch.zeros(1, 1, h * sr_ratio, w * sr_ratio, dtype=dtype)
            state.smoother.superres(color, gray_full, sr_ratio)
    finally:
        for hk in hooks:
            hk.remove()

    n = (h // 4) * (w // 4)
    c = state.encoder.pyramid_channels
    counts["correspondence"] = n * n * c + n * n * 2  # similarity matmul + attention apply
    return counts
