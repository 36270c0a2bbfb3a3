"""Synthetic video clips with exact analytic optical flow and segmentation masks.

Scenes are textured moving shapes over a static textured background. Motion is
a per-object affine step transform, so per-pixel displacement fields and
object masks are exact by construction, and the textures are band-limited
(long-period sinusoids) so that bilinear warping reconstructs frames to well
under one 8-bit quantization step away from occlusion boundaries.
"""

import os
import re
from dataclasses import dataclass, field

import numpy as np
from PIL import Image

from .colorspace import lab_to_rgb, rgb_to_lab
from .errors import ClipLoadError, ValidationError
from .flowwarp import horizontal_mirror_field, invert_flow, mirror_flow_horizontal
from .svcf import read_svcf, write_svcf

MOTION_MODELS = ("translation", "rotation", "affine")

# normalized (L, a, b) colors; index 0 is the background. All chosen mid-gamut
# so texture modulation stays displayable.
DEFAULT_PALETTE = (
    (0.45, 0.490, 0.540),
    (0.60, 0.600, 0.570),
    (0.55, 0.430, 0.585),
    (0.50, 0.505, 0.415),
    (0.62, 0.560, 0.450),
    (0.40, 0.545, 0.560),
)


@dataclass
class SynthSpec:
    """Recipe for one synthetic clip; generation is a pure function of this."""

    n_frames: int = 8
    resolution: tuple = (128, 224)
    n_objects: int = 2
    motion_model: str = "translation"
    palette: tuple = DEFAULT_PALETTE
    seed: int = 0
    # optional per-object (step_matrix, shift) pairs pinning the motion exactly
    motion_overrides: tuple = None

    def validate(self):
        h, w = self.resolution
        if self.n_frames < 1:
            raise ValidationError(f"n_frames must be >= 1, got {self.n_frames}")
        if h % 32 != 0 or w % 32 != 0:
            raise ValidationError(f"resolution {self.resolution} not divisible by 32")
        if self.motion_model not in MOTION_MODELS:
            raise ValidationError(f"unknown motion model {self.motion_model!r}")
        if self.n_objects < 0:
            raise ValidationError("n_objects must be >= 0")


@dataclass
class VideoClip:
    """Ordered (gray, ab) frames plus optional segmentation maps and forward flows."""

    frames: list
    seg_maps: list = None
    flows_forward: list = None
    resolution: tuple = None

    def __post_init__(self):
        if not self.frames:
            raise ValidationError("clip must contain at least one frame")
        hw = self.frames[0][0].shape
        for gray, ab in self.frames:
            if gray.shape != hw or ab.shape[:2] != hw:
                raise ValidationError("all frames must share one resolution")
        if self.flows_forward is not None and len(self.flows_forward) != len(self.frames) - 1:
            raise ValidationError(
                f"expected {len(self.frames) - 1} forward flows, got {len(self.flows_forward)}"
            )
        self.resolution = tuple(hw)

    @property
    def n_frames(self):
        return len(self.frames)

    def gray(self, t):
        return self.frames[t][0]

    def ab(self, t):
        return self.frames[t][1]


class _SceneObject:
    """Disk with procedural texture, moved by one affine step per frame.

    World position of material point m at time t is M^t m + center + t * shift,
    so the exact frame-t flow inside the footprint is
    (M - I)(p - center - t*shift) + shift.
    """

    def __init__(self, center, radius, step_matrix, shift, color, rng):
        self.center = np.asarray(center, dtype=np.float64)
        self.radius = float(radius)
        self.m = np.asarray(step_matrix, dtype=np.float64)
        self.shift = np.asarray(shift, dtype=np.float64)
        self.color = color
        # band-limited texture: periods >= 14 px keep bilinear warp error tiny
        self.tex_freq = rng.uniform(1.0 / 40.0, 1.0 / 14.0, size=(3, 2)) * rng.choice(
            [-1.0, 1.0], size=(3, 2)
        )
        self.tex_phase = rng.uniform(0.0, 2 * np.pi, size=3)
        self.tex_amp = np.array([0.05, 0.02, 0.02])

    def _pose(self, t):
        m_t = np.linalg.matrix_power(self.m, t)
        offset = self.center + t * self.shift
        return m_t, offset

    def material_coords(self, grid_xy, t):
        m_t, offset = self._pose(t)
        return (grid_xy - offset) @ np.linalg.inv(m_t).T

    def texture(self, material_xy):
        phases = material_xy @ self.tex_freq.T * (2 * np.pi) + self.tex_phase
        waves = np.sin(phases)
        lum = self.color[0] + self.tex_amp[0] * waves[..., 0]
        a = self.color[1] + self.tex_amp[1] * waves[..., 1]
        b = self.color[2] + self.tex_amp[2] * waves[..., 2]
        return lum, a, b

    def flow_at(self, grid_xy, t):
        _, offset = self._pose(t)
        return (grid_xy - offset) @ (self.m - np.eye(2)).T + self.shift

    def max_reach(self, n_frames):
        reach = 0.0
        for t in range(n_frames):
            m_t, offset = self._pose(t)
            scale = np.linalg.norm(m_t, 2)
            reach = max(reach, np.linalg.norm(offset - self.center) + self.radius * scale)
        return reach


def _make_step(motion_model, rng):
    if motion_model == "translation":
        angle = rng.uniform(0, 2 * np.pi)
        speed = rng.uniform(1.0, 3.0)
        return np.eye(2), speed * np.array([np.cos(angle), np.sin(angle)])
    if motion_model == "rotation":
        omega = rng.choice([-1.0, 1.0]) * rng.uniform(0.02, 0.05)
        c, s = np.cos(omega), np.sin(omega)
        return np.array([[c, -s], [s, c]]), np.zeros(2)
    omega = rng.choice([-1.0, 1.0]) * rng.uniform(0.01, 0.03)
    c, s = np.cos(omega), np.sin(omega)
    rot = np.array([[c, -s], [s, c]])
    stretch = np.diag(1.0 + rng.uniform(-0.004, 0.004, size=2))
    angle = rng.uniform(0, 2 * np.pi)
    shift = rng.uniform(0.5, 1.5) * np.array([np.cos(angle), np.sin(angle)])
    return rot @ stretch, shift


def _place_objects(spec, rng):
    h, w = spec.resolution
    objects = []
    for k in range(spec.n_objects):
        color = spec.palette[1 + k % (len(spec.palette) - 1)]
        for _ in range(200):
            radius = rng.uniform(min(h, w) / 9.0, min(h, w) / 5.5)
            if spec.motion_overrides is not None and k < len(spec.motion_overrides):
                step_m, shift = (np.asarray(v, dtype=np.float64) for v in spec.motion_overrides[k])
            else:
                step_m, shift = _make_step(spec.motion_model, rng)
            center = np.array(
                [rng.uniform(radius + 4, w - radius - 4), rng.uniform(radius + 4, h - radius - 4)]
            )
            candidate = _SceneObject(center, radius, step_m, shift, color, rng)
            reach = candidate.max_reach(spec.n_frames)
            if not (
                reach + 2 < center[0] < w - reach - 2 and reach + 2 < center[1] < h - reach - 2
            ):
                continue
            if all(
                np.linalg.norm(center - other.center)
                > reach + other.max_reach(spec.n_frames) + 3
                for other in objects
            ):
                objects.append(candidate)
                break
        else:
            raise ValidationError(
                f"could not place {spec.n_objects} disjoint objects in {spec.resolution}"
            )
    return objects


def generate_clip(spec: SynthSpec) -> VideoClip:
    """Render the clip described by ``spec`` with exact flows and binary masks."""
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    h, w = spec.resolution
    ys, xs = np.mgrid[0:h, 0:w]
    grid_xy = np.stack([xs, ys], axis=-1).astype(np.float64)

    bg = spec.palette[0]
    bg_freq = rng.uniform(1.0 / 48.0, 1.0 / 18.0, size=(3, 2)) * rng.choice([-1, 1], size=(3, 2))
    bg_phase = rng.uniform(0, 2 * np.pi, size=3)
    bg_phases = grid_xy @ bg_freq.T * (2 * np.pi) + bg_phase
    bg_waves = np.sin(bg_phases)
    bg_lum = bg[0] + 0.05 * bg_waves[..., 0]
    bg_a = bg[1] + 0.02 * bg_waves[..., 1]
    bg_b = bg[2] + 0.02 * bg_waves[..., 2]

    objects = _place_objects(spec, rng)

    frames, segs, flows = [], [], []
    for t in range(spec.n_frames):
        lum, a, b = bg_lum.copy(), bg_a.copy(), bg_b.copy()
        seg = np.zeros((h, w), dtype=np.float64)
        flow = np.zeros((h, w, 2), dtype=np.float32)
        for obj in objects:
            material = obj.material_coords(grid_xy, t)
            sdf = np.linalg.norm(material, axis=-1) - obj.radius
            coverage = np.clip(0.5 - sdf / 1.5, 0.0, 1.0)
            o_lum, o_a, o_b = obj.texture(material)
            lum = coverage * o_lum + (1 - coverage) * lum
            a = coverage * o_a + (1 - coverage) * a
            b = coverage * o_b + (1 - coverage) * b
            inside = sdf < 0
            seg[inside] = 1.0
            flow[inside] = obj.flow_at(grid_xy, t)[inside].astype(np.float32)
        frames.append((np.clip(lum, 0.0, 1.0), np.clip(np.stack([a, b], axis=-1), 0.0, 1.0)))
        segs.append(seg)
        if t < spec.n_frames - 1:
            flows.append(flow)
    return VideoClip(frames=frames, seg_maps=segs, flows_forward=flows or None)


# ---------------------------------------------------------------------------
# clip directory IO: frame_%05d.png (RGB 8-bit), seg_%05d.png (gray 8-bit),
# flow_%05d.svcf (raw float32)
# ---------------------------------------------------------------------------

def save_clip(clip: VideoClip, dir_path):
    os.makedirs(dir_path, exist_ok=True)
    for t, (gray, ab) in enumerate(clip.frames):
        rgb = np.round(lab_to_rgb(gray, ab) * 255.0).astype(np.uint8)
        Image.fromarray(rgb).save(os.path.join(dir_path, f"frame_{t:05d}.png"))
        if clip.seg_maps is not None:
            seg8 = np.round(np.clip(clip.seg_maps[t], 0, 1) * 255.0).astype(np.uint8)
            Image.fromarray(seg8, mode="L").save(os.path.join(dir_path, f"seg_{t:05d}.png"))
    if clip.flows_forward is not None:
        for t, flow in enumerate(clip.flows_forward):
            write_svcf(os.path.join(dir_path, f"flow_{t:05d}.svcf"), flow)


def _count_indexed(dir_path, pattern):
    found = set()
    rx = re.compile(pattern)
    for name in os.listdir(dir_path):
        m = rx.fullmatch(name)
        if m:
            found.add(int(m.group(1)))
    return found


def load_clip(dir_path) -> VideoClip:
    if not os.path.isdir(dir_path):
        raise ClipLoadError(f"{dir_path}: not a directory")
    frame_ids = _count_indexed(dir_path, r"frame_(\d{5})\.png")
    if not frame_ids:
        raise ClipLoadError(f"{dir_path}: no frame_*.png files")
    n = max(frame_ids) + 1
    frames = []
    for t in range(n):
        path = os.path.join(dir_path, f"frame_{t:05d}.png")
        if t not in frame_ids:
            raise ClipLoadError(f"{dir_path}: missing {os.path.basename(path)}")
        rgb = np.asarray(Image.open(path).convert("RGB"), dtype=np.float64) / 255.0
        frames.append(rgb_to_lab(rgb))

    segs = None
    if _count_indexed(dir_path, r"seg_(\d{5})\.png"):
        segs = []
        for t in range(n):
            path = os.path.join(dir_path, f"seg_{t:05d}.png")
            if not os.path.exists(path):
                raise ClipLoadError(f"{dir_path}: missing {os.path.basename(path)}")
            segs.append(np.asarray(Image.open(path).convert("L"), dtype=np.float64) / 255.0)

    flows = None
    if os.path.exists(os.path.join(dir_path, "flow_00000.svcf")):
        flows = []
        for t in range(n - 1):
            path = os.path.join(dir_path, f"flow_{t:05d}.svcf")
            if not os.path.exists(path):
                raise ClipLoadError(f"{dir_path}: missing {os.path.basename(path)}")
            flows.append(read_svcf(path))

    return VideoClip(frames=frames, seg_maps=segs, flows_forward=flows)


def _mirror_frame(gray, ab):
    return gray[:, ::-1].copy(), ab[:, ::-1, :].copy()


def make_training_batch(clip: VideoClip, rng) -> VideoClip:
    """13-frame training batch: 7 consecutive frames preceded by the horizontally
    mirrored reversal of the first 6 of them.

    Flows for the mirrored prefix are the mirrored inverses of the originals;
    the junction transition is the exact analytic mirror field.
    """
    if clip.n_frames < 7:
        raise ValidationError(f"need at least 7 frames, clip has {clip.n_frames}")
    t0 = int(rng.integers(0, clip.n_frames - 6))
    return build_training_batch(clip, t0)


def training_batch_plan(n_frames: int, t0: int):
    """Frame and flow assembly orders for a 13-frame batch starting at ``t0``.

    Returns (frame_entries, flow_entries): frame entries are ("mirror"|"orig",
    index) pairs; flow entries are ("mirror_inv", t) for mirrored inverted
    per-step flows, ("junction", None) for the analytic mirror field at the
    prefix/suffix boundary, and ("orig", t) for untouched forward flows.
    """
    if not (0 <= t0 <= n_frames - 7):
        raise ValidationError(f"window start {t0} out of range for {n_frames} frames")
    frame_entries = [("mirror", t0 + 5 - k) for k in range(6)]
    frame_entries += [("orig", t0 + k) for k in range(7)]
    flow_entries = [("mirror_inv", t0 + 4 - k) for k in range(5)]
    flow_entries.append(("junction", None))
    flow_entries += [("orig", t0 + k) for k in range(6)]
    return frame_entries, flow_entries


def build_training_batch(clip: VideoClip, t0: int) -> VideoClip:
    """Deterministic variant of :func:`make_training_batch` for a given window start."""
    frame_entries, flow_entries = training_batch_plan(clip.n_frames, t0)

    frames = [
        _mirror_frame(*clip.frames[t]) if kind == "mirror" else clip.frames[t]
        for kind, t in frame_entries
    ]

    segs = None
    if clip.seg_maps is not None:
        segs = [
            clip.seg_maps[t][:, ::-1].copy() if kind == "mirror" else clip.seg_maps[t]
            for kind, t in frame_entries
        ]

    flows = None
    if clip.flows_forward is not None:
        flows = []
        for kind, t in flow_entries:
            if kind == "mirror_inv":
                flows.append(mirror_flow_horizontal(invert_flow(clip.flows_forward[t])))
            elif kind == "junction":
                flows.append(horizontal_mirror_field(clip.resolution))
            else:
                flows.append(clip.flows_forward[t])

    return VideoClip(frames=frames, seg_maps=segs, flows_forward=flows)
