"""In-memory session registry and the per-session colorization worker.

Request handling stays concurrent; each session serializes its own pipeline
execution through a mutex, and results carry a version so edits made after a
run started can never surface stale frames.
"""

import io
import threading
import uuid

import numpy as np
from PIL import Image

from ..colorspace import lab_to_rgb, rgb_to_lab
from ..errors import ValidationError
from ..flowwarp import FileFlow, GroundTruthFlow, ZeroFlow
from ..pipeline import colorize_clip
from ..scribble import rasterize, scribbles_from_json

IDLE, RUNNING, DONE, FAILED = "idle", "running", "done", "failed"


class Session:
    def __init__(self, grays, clip_dir=None, flows=None):
        self.id = uuid.uuid4().hex[:12]
        self.grays = grays
        self.clip_dir = clip_dir
        self.flows = flows
        self.scribbles = None  # validated payload dict
        self.status = IDLE
        self.frames_done = 0
        self.version = 0
        self.results = None  # list of PNG bytes for the completed version
        self.error = None
        self.lock = threading.Lock()

    @property
    def n_frames(self):
        return len(self.grays)

    @property
    def resolution(self):
        return self.grays[0].shape


class SessionStore:
    def __init__(self):
        self._sessions = {}
        self._lock = threading.Lock()

    def add(self, session):
        with self._lock:
            self._sessions[session.id] = session

    def get(self, session_id):
        with self._lock:
            return self._sessions.get(session_id)

    def remove(self, session_id):
        with self._lock:
            return self._sessions.pop(session_id, None)


def decode_gray_png(data: bytes):
    rgb = np.asarray(Image.open(io.BytesIO(data)).convert("RGB"), dtype=np.float64) / 255.0
    gray, _ = rgb_to_lab(rgb)
    return gray


def encode_png(rgb):
    img = Image.fromarray(np.round(np.clip(rgb, 0, 1) * 255.0).astype(np.uint8))
    buf = io.BytesIO()
    img.save(buf, format="PNG")
    return buf.getvalue()


def encode_gray_png(gray):
    img = Image.fromarray(np.round(np.clip(gray, 0, 1) * 255.0).astype(np.uint8), mode="L")
    buf = io.BytesIO()
    img.save(buf, format="PNG")
    return buf.getvalue()


def make_flow_provider(session, flow_mode, low_hw):
    if flow_mode == "zero":
        return ZeroFlow(low_hw)
    if flow_mode == "gt":
        if session.flows is None:
            raise ValidationError("session has no ground-truth flows; use flow=zero")
        return GroundTruthFlow(session.flows)
    if flow_mode == "file":
        if session.clip_dir is None:
            raise ValidationError("session was not created from a clip directory")
        return FileFlow(session.clip_dir)
    raise ValidationError(f"unknown flow mode {flow_mode!r}; expected zero|gt|file")


def run_colorization(session: Session, state, sr_ratio, flow_mode):
    """Worker body: runs the pipeline and publishes results if still current."""
    version = session.version
    try:
        full_hw = session.resolution
        if full_hw[0] % sr_ratio or full_hw[1] % sr_ratio:
            raise ValidationError(f"frame resolution {full_hw} not divisible by sr_ratio {sr_ratio}")
        low_hw = (full_hw[0] // sr_ratio, full_hw[1] // sr_ratio)

        points = []
        radius = 2
        if session.scribbles is not None:
            points, declared_hw, radius = scribbles_from_json(session.scribbles)
            if tuple(declared_hw) != low_hw:
                raise ValidationError(
                    f"scribble resolution {tuple(declared_hw)} != processing resolution {low_hw}"
                )
        smap = rasterize(points, low_hw, radius=radius)
        provider = make_flow_provider(session, flow_mode, low_hw)

        def progress(done):
            if session.version == version:
                session.frames_done = done

        result = colorize_clip(
            state, session.grays, smap, provider, sr_ratio=sr_ratio, progress=progress
        )
        pngs = [
            encode_png(lab_to_rgb(gray, z)) for gray, z in zip(session.grays, result.z_ab)
        ]
        with session.lock:
            if session.version == version:
                session.results = pngs
                session.status = DONE
    except Exception as exc:  # pragma: no cover - surfaced through /status
        with session.lock:
            if session.version == version:
                session.error = str(exc)
                session.status = FAILED
