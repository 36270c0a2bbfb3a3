"""Loss functions, quality metrics, and the staged training loop.

Stages: per-frame colorizer warm-up, refinement and super-resolution
self-reconstruction warm-ups, then joint end-to-end training on 13-frame
batches with split learning rates. Each stage halves its learning rate once.
"""

import dataclasses
import json
import math

import numpy as np
import torch

from .checkpoint import ModelState
from .errors import ConfigurationError, ValidationError
from .flowwarp import (
    DEFAULT_MASK_SHARPNESS,
    GroundTruthFlow,
    horizontal_mirror_field,
    invert_flow,
    mirror_flow_horizontal,
    occlusion_mask,
    rescale_flow,
    warp_backward,
    warp_backward_batch,
)
from .imageops import resize_plane
from .pipeline import SmoothingRun, _plane_to_nchw
from .scribble import MAX_SCRIBBLES, empty_scribble_map, propagate_scribbles, rasterize, sample_scribbles
from .synthdata import training_batch_plan

STAGES = ("cpnet_warmup", "ssnet_rm_warmup", "ssnet_sr_warmup", "joint")
JOINT_PREREQUISITES = ("cpnet_warmup", "ssnet_rm_warmup", "ssnet_sr_warmup")

# paper-shaped split: the colorizer trains far slower than the smoother during
# the joint stage
JOINT_CPNET_LR_FRACTION = 0.02


@dataclasses.dataclass
class TrainConfig:
    stage: str
    iterations: int = 500
    lr_initial: float = 1e-4
    lr_halve_at: int = None
    batch_size: int = 1
    lambda_s: float = 0.1
    adam_beta1: float = 0.5
    adam_beta2: float = 0.999
    seed: int = 0
    sr_ratio: int = None  # None: use the model's configured ratio
    lr_cpnet: float = None  # joint only; None: lr_initial * JOINT_CPNET_LR_FRACTION
    scribble_dropout: float = 0.5
    # joint only: std of the perturbation applied to colorizer outputs entering
    # the smoothing stack. Stands in for the per-frame error diversity that
    # large training sets provide; a perfectly memorized clip otherwise gives
    # the aggregation modules nothing to correct.
    smoothing_input_noise: float = 0.03

    def __post_init__(self):
        if self.stage not in STAGES:
            raise ValidationError(f"unknown stage {self.stage!r}; expected one of {STAGES}")
        if self.lr_initial <= 0:
            raise ValidationError("lr_initial must be positive")
        if self.lambda_s < 0:
            raise ValidationError("lambda_s must be >= 0")
        if self.lr_halve_at is None:
            self.lr_halve_at = max(1, self.iterations // 2)


@dataclasses.dataclass
class MetricReport:
    psnr_db: float
    ssim: float
    temporal_warp_error: float
    per_frame: dict

    def to_json(self):
        return json.dumps(dataclasses.asdict(self), indent=2, sort_keys=True)


# ---------------------------------------------------------------------------
# losses (numpy or torch; torch stays on the autograd tape)
# ---------------------------------------------------------------------------

def _l1(a, b, name):
    if tuple(a.shape) != tuple(b.shape):
        raise ValidationError(f"{name}: shape {tuple(a.shape)} != {tuple(b.shape)}")
    out = abs(a - b).mean()
    return out if torch.is_tensor(out) else float(out)


def loss_color_cp(y_ab, gt_ab):
    """Mean absolute chrominance error of the colorizer output."""
    return _l1(y_ab, gt_ab, "color loss")


def loss_seg_cp(p, q):
    """Mean absolute error between predicted and reference segmentation."""
    return _l1(p, q, "segmentation loss")


def loss_cp(y_ab, gt_ab, p, q, lambda_s=0.1):
    """Colorizer training objective: color term plus weighted segmentation term."""
    return loss_color_cp(y_ab, gt_ab) + lambda_s * loss_seg_cp(p, q)


def loss_ss(d_ab, gt_low_ab, z_ab, gt_full_ab):
    """Smoothing objective: L1 at processing resolution plus L1 at output resolution."""
    return _l1(d_ab, gt_low_ab, "low-res smoothing loss") + _l1(
        z_ab, gt_full_ab, "full-res smoothing loss"
    )


def loss_joint(y_ab, gt_low_ab, p, q, d_ab, z_ab, gt_full_ab, lambda_s=0.1):
    """Joint objective: colorizer loss plus smoothing loss."""
    return loss_cp(y_ab, gt_low_ab, p, q, lambda_s) + loss_ss(d_ab, gt_low_ab, z_ab, gt_full_ab)


# ---------------------------------------------------------------------------
# metrics
# ---------------------------------------------------------------------------

PSNR_CAP_DB = 100.0


def psnr(pred, gt):
    """Peak signal-to-noise ratio for [0,1]-ranged arrays, capped at 100 dB."""
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    if pred.shape != gt.shape:
        raise ValidationError(f"psnr: shape {pred.shape} != {gt.shape}")
    mse = float(np.mean((pred - gt) ** 2))
    if mse <= 0.0:
        return PSNR_CAP_DB
    return min(-10.0 * math.log10(mse), PSNR_CAP_DB)


def _gaussian_kernel(size=11, sigma=1.5):
    half = (size - 1) / 2.0
    coords = np.arange(size) - half
    g = np.exp(-(coords**2) / (2 * sigma**2))
    kernel = np.outer(g, g)
    return kernel / kernel.sum()


def ssim(pred, gt, window=11, sigma=1.5, k1=0.01, k2=0.03):
    """Structural similarity with a Gaussian window, data range 1.

    Multi-plane inputs average the per-plane scores.
    """
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    if pred.shape != gt.shape:
        raise ValidationError(f"ssim: shape {pred.shape} != {gt.shape}")
    if pred.ndim == 3:
        return float(np.mean([ssim(pred[..., c], gt[..., c], window, sigma, k1, k2) for c in range(pred.shape[2])]))
    if min(pred.shape) < window:
        raise ValidationError(f"ssim: image smaller than the {window}x{window} window")

    kernel = torch.from_numpy(_gaussian_kernel(window, sigma))[None, None]

    def filt(img):
        return torch.nn.functional.conv2d(torch.from_numpy(img)[None, None], kernel)[0, 0]

    c1, c2 = k1**2, k2**2
    mu_x = filt(pred)
    mu_y = filt(gt)
    xx = filt(pred * pred) - mu_x * mu_x
    yy = filt(gt * gt) - mu_y * mu_y
    xy = filt(pred * gt) - mu_x * mu_y
    score = ((2 * mu_x * mu_y + c1) * (2 * xy + c2)) / (
        (mu_x * mu_x + mu_y * mu_y + c1) * (xx + yy + c2)
    )
    return float(score.mean())


def temporal_warp_error(frames, flows, grays=None, alpha=DEFAULT_MASK_SHARPNESS):
    """Mean occlusion-weighted L1 between each flow-aligned frame and its
    predecessor. ``grays`` (if given) drive the occlusion weighting; otherwise
    every pixel counts equally."""
    if len(flows) != len(frames) - 1:
        raise ValidationError(f"expected {len(frames) - 1} flows for {len(frames)} frames")
    total = 0.0
    for t, flow in enumerate(flows):
        warped = warp_backward(np.asarray(frames[t + 1], dtype=np.float64), np.asarray(flow))
        diff = np.abs(warped - frames[t])
        if grays is None:
            total += float(diff.mean())
            continue
        warped_gray = warp_backward(np.asarray(grays[t + 1], dtype=np.float64), np.asarray(flow))
        mask = occlusion_mask(warped_gray, np.asarray(grays[t], dtype=np.float64), alpha=alpha)
        channels = diff.shape[2] if diff.ndim == 3 else 1
        weights = mask[..., None] if diff.ndim == 3 else mask
        total += float((weights * diff).sum() / (mask.sum() * channels))
    return total / len(flows)


# ---------------------------------------------------------------------------
# stage runner
# ---------------------------------------------------------------------------

class _ClipStore:
    """Per-clip tensors shared across training steps.

    Full- and processing-resolution planes, their mirrored variants, per-step
    low-resolution flows (plus mirrored inverses), and per-window alignment
    caches are all pure functions of the clip, so they are built once.
    """

    def __init__(self, clip, ratio, dtype):
        self.clip = clip
        self.ratio = ratio
        self.dtype = dtype
        self.full_hw = clip.resolution
        self.low_hw = (self.full_hw[0] // ratio, self.full_hw[1] // ratio)
        self._frames = {}
        self._low_flows = {}
        self._mirror_inv_flows = {}
        self._windows = {}

    def frame(self, t, kind="orig"):
        key = (kind, t)
        if key not in self._frames:
            gray, ab = self.clip.frames[t]
            seg = self.clip.seg_maps[t] if self.clip.seg_maps is not None else None
            if kind == "mirror":
                gray, ab = gray[:, ::-1], ab[:, ::-1, :]
                seg = seg[:, ::-1] if seg is not None else None
            low_gray = resize_plane(np.ascontiguousarray(gray), self.low_hw, mode="area")
            low_ab = resize_plane(np.ascontiguousarray(ab), self.low_hw, mode="area")
            entry = {
                "full_gray": _plane_to_nchw(np.ascontiguousarray(gray), self.dtype),
                "full_ab": _plane_to_nchw(np.ascontiguousarray(ab), self.dtype),
                "low_gray": _plane_to_nchw(low_gray, self.dtype),
                "low_ab": _plane_to_nchw(low_ab, self.dtype),
                "low_ab_np": low_ab,
                "low_seg": None
                if seg is None
                else _plane_to_nchw(
                    resize_plane(np.ascontiguousarray(seg), self.low_hw, mode="area"), self.dtype
                ),
            }
            self._frames[key] = entry
        return self._frames[key]

    def low_flow(self, t):
        if t not in self._low_flows:
            self._low_flows[t] = rescale_flow(self.clip.flows_forward[t], self.low_hw).astype(
                np.float32
            )
        return self._low_flows[t]

    def mirror_inv_flow(self, t):
        if t not in self._mirror_inv_flows:
            self._mirror_inv_flows[t] = mirror_flow_horizontal(invert_flow(self.low_flow(t)))
        return self._mirror_inv_flows[t]

    def low_provider(self):
        if "all" not in self._windows:
            flows = [self.low_flow(t) for t in range(self.clip.n_frames - 1)]
            self._windows["all"] = GroundTruthFlow(flows)
        return self._windows["all"]

    def window(self, t0):
        """Frames, flow provider, and smoothing caches for one 13-frame batch."""
        if t0 not in self._windows:
            frame_entries, flow_entries = training_batch_plan(self.clip.n_frames, t0)
            frames = [self.frame(t, kind) for kind, t in frame_entries]
            flows = []
            for kind, t in flow_entries:
                if kind == "mirror_inv":
                    flows.append(self.mirror_inv_flow(t))
                elif kind == "junction":
                    flows.append(horizontal_mirror_field(self.low_hw))
                else:
                    flows.append(self.low_flow(t))
            self._windows[t0] = (frames, GroundTruthFlow(flows), {})
        return self._windows[t0]


def _random_scribble_map(ab_low, rng, dropout, radius=2):
    if rng.random() < dropout:
        return empty_scribble_map(ab_low.shape[:2])
    count = int(rng.integers(1, MAX_SCRIBBLES + 1))
    return rasterize(sample_scribbles(ab_low, count, radius=radius, rng=rng), ab_low.shape[:2], radius)


def _current_lr(config, step, base):
    return base * (0.5 if step >= config.lr_halve_at else 1.0)


def run_stage(config: TrainConfig, data, state: ModelState):
    """Run one training stage over ``data`` (a list of full-resolution clips).

    Returns (state, curve) where curve is a list of (step, loss, lr) rows.
    The joint stage refuses to start unless all warm-up stages are recorded in
    the checkpoint. Frozen encoder parameters never change.
    """
    if config.stage == "joint":
        missing = [s for s in JOINT_PREREQUISITES if s not in state.stages_completed]
        if missing:
            raise ConfigurationError(
                f"joint stage requires completed warm-ups; missing: {', '.join(missing)}"
            )
        for clip in data:
            if clip.n_frames < 7:
                raise ConfigurationError("joint stage needs clips with at least 7 frames")

    torch.manual_seed(config.seed)
    rng = np.random.default_rng(config.seed)
    ratio = config.sr_ratio or state.ssnet_config.sr_ratio
    dtype = next(state.colorizer.parameters()).dtype

    stores = [_ClipStore(clip, ratio, dtype) for clip in data]

    if config.stage == "cpnet_warmup":
        params = [{"params": state.colorizer.trainable_parameters(), "lr": config.lr_initial}]
    elif config.stage == "ssnet_rm_warmup":
        params = [{"params": list(state.smoother.refine.parameters()), "lr": config.lr_initial}]
    elif config.stage == "ssnet_sr_warmup":
        params = [{"params": list(state.smoother.superres.parameters()), "lr": config.lr_initial}]
    else:
        lr_cp = config.lr_cpnet if config.lr_cpnet is not None else config.lr_initial * JOINT_CPNET_LR_FRACTION
        params = [
            {"params": state.colorizer.trainable_parameters(), "lr": lr_cp},
            {"params": list(state.smoother.parameters()), "lr": config.lr_initial},
        ]
    optimizer = torch.optim.Adam(params, betas=(config.adam_beta1, config.adam_beta2))
    base_lrs = [group["lr"] for group in optimizer.param_groups]

    state.colorizer.train()
    state.smoother.train()
    curve = []
    for step in range(config.iterations):
        for group, base in zip(optimizer.param_groups, base_lrs):
            group["lr"] = _current_lr(config, step, base)
        optimizer.zero_grad()
        losses = []
        for _ in range(config.batch_size):
            k = int(rng.integers(0, len(data)))
            losses.append(_stage_loss(config, state, stores[k], rng))
        loss = sum(losses) / len(losses)
        loss.backward()
        optimizer.step()
        curve.append((step, float(loss.detach()), _current_lr(config, step, base_lrs[-1])))
        if not math.isfinite(curve[-1][1]):
            raise RuntimeError(f"non-finite loss at step {step}")
    state.colorizer.eval()
    state.smoother.eval()

    if config.stage not in state.stages_completed:
        state.stages_completed.append(config.stage)
    return state, curve


def _stage_loss(config, state, store, rng):
    dtype = store.dtype
    n = store.clip.n_frames

    if config.stage == "cpnet_warmup":
        frame = store.frame(int(rng.integers(0, n)))
        smap = _random_scribble_map(frame["low_ab_np"], rng, config.scribble_dropout)
        y, p = state.colorizer(frame["low_gray"], _plane_to_nchw(smap, dtype))
        gt_seg = frame["low_seg"] if frame["low_seg"] is not None else torch.zeros_like(p)
        return loss_cp(y, frame["low_ab"], p, gt_seg, config.lambda_s)

    if config.stage == "ssnet_rm_warmup":
        t = int(rng.integers(0, n))
        if t == 0:
            neighbor = 1
        elif t == n - 1:
            neighbor = t - 1
        else:
            neighbor = t + (1 if rng.random() < 0.5 else -1)
        if store.clip.flows_forward is not None:
            flow = torch.from_numpy(
                np.ascontiguousarray(store.low_provider().between(neighbor, t))
            ).to(dtype)[None]
        else:
            flow = torch.zeros((1, *store.low_hw, 2), dtype=dtype)
        frame, other = store.frame(t), store.frame(neighbor)
        warped_ab = warp_backward_batch(other["low_ab"], flow)
        warped_gray = warp_backward_batch(other["low_gray"], flow)
        mask = occlusion_mask(warped_gray, frame["low_gray"])
        out = state.smoother.refine(warped_ab, mask)
        return abs(out - frame["low_ab"]).mean()

    if config.stage == "ssnet_sr_warmup":
        frame = store.frame(int(rng.integers(0, n)))
        r = int(rng.choice([2, 4, 8]))
        full = frame["full_ab"]
        gray = frame["full_gray"]
        # crop so the low-res side never exceeds the processing resolution;
        # keeps the per-step cost flat across ratios
        ch = min(full.shape[2], store.low_hw[0] * r)
        cw = min(full.shape[3], store.low_hw[1] * r)
        ch -= ch % r
        cw -= cw % r
        if (ch, cw) != full.shape[2:]:
            oy = int(rng.integers(0, full.shape[2] - ch + 1))
            ox = int(rng.integers(0, full.shape[3] - cw + 1))
            full = full[:, :, oy : oy + ch, ox : ox + cw]
            gray = gray[:, :, oy : oy + ch, ox : ox + cw]
        low = torch.nn.functional.interpolate(full, scale_factor=1.0 / r, mode="area")
        out = state.smoother.superres(low, gray, r)
        return abs(out - full).mean()

    return _joint_loss(config, state, store, rng)


def _joint_loss(config, state, store, rng):
    t0 = int(rng.integers(0, store.clip.n_frames - 6))
    frames, provider, aux = store.window(t0)
    dtype = store.dtype

    # scribbles: only the first frame gets user hints; later frames receive the
    # forward-splatted previous map
    smap = _random_scribble_map(frames[0]["low_ab_np"], rng, config.scribble_dropout)
    y_list, p_list = [], []
    for t, frame in enumerate(frames):
        if t > 0:
            smap = propagate_scribbles(smap, np.asarray(provider.step_forward(t - 1)))
        y, p = state.colorizer(frame["low_gray"], _plane_to_nchw(smap, dtype))
        y_list.append(y)
        p_list.append(p)

    y_for_smoothing = y_list
    if config.smoothing_input_noise > 0:
        sigma = config.smoothing_input_noise
        y_for_smoothing = [
            (y + sigma * torch.randn(y.shape, dtype=y.dtype)).clamp(0.0, 1.0) for y in y_list
        ]

    run = SmoothingRun(state, [f["low_gray"] for f in frames], y_for_smoothing, provider, aux_cache=aux)
    total = 0.0
    for i, frame in enumerate(frames):
        d, z = run.step_with_superres(i, frame["full_gray"], sr_ratio=store.ratio)
        gt_seg = frame["low_seg"] if frame["low_seg"] is not None else torch.zeros_like(p_list[i])
        total = total + loss_joint(
            y_list[i], frame["low_ab"], p_list[i], gt_seg, d, z, frame["full_ab"], config.lambda_s
        )
    return total / len(frames)


def write_loss_csv(path, curve):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("step,loss,lr\n")
        for step, loss, lr in curve:
            fh.write(f"{step},{loss!r},{lr!r}\n")


def evaluate_on_clip(state, clip, flow_provider, sr_ratio=None, scribble_count=40, seed=0):
    """Colorize a ground-truth clip from sampled scribbles and score the result.

    PSNR/SSIM are computed on the final full-resolution chrominance against
    the clip's own chrominance; the warp error uses the clip's flows and
    luminance for occlusion weighting.
    """
    from .pipeline import colorize_clip  # local import; pipeline imports this module's deps

    ratio = sr_ratio or state.ssnet_config.sr_ratio
    low_hw = (clip.resolution[0] // ratio, clip.resolution[1] // ratio)
    ab0_low = resize_plane(clip.ab(0), low_hw, mode="area")
    points = sample_scribbles(ab0_low, scribble_count, rng=np.random.default_rng(seed))
    grays = [clip.gray(t) for t in range(clip.n_frames)]
    result = colorize_clip(state, grays, points, flow_provider, sr_ratio=ratio)

    per_psnr = [psnr(z, clip.ab(t)) for t, z in enumerate(result.z_ab)]
    per_ssim = [ssim(z, clip.ab(t)) for t, z in enumerate(result.z_ab)]
    if clip.flows_forward is not None:
        twe = temporal_warp_error(result.z_ab, clip.flows_forward, grays=grays)
    else:
        twe = temporal_warp_error(result.z_ab, [np.zeros((*clip.resolution, 2))] * (clip.n_frames - 1))
    whole_pred = np.concatenate(result.z_ab, axis=0)
    whole_gt = np.concatenate([clip.ab(t) for t in range(clip.n_frames)], axis=0)
    report = MetricReport(
        psnr_db=psnr(whole_pred, whole_gt),
        ssim=float(np.mean(per_ssim)),
        temporal_warp_error=twe,
        per_frame={"psnr_db": per_psnr, "ssim": per_ssim},
    )
    return report, result
