"""Scribble-driven video colorization with temporal aggregation."""

__version__ = "0.1.0"

from .checkpoint import ModelState, init_model_state, load_checkpoint, save_checkpoint
from .synthdata import SynthSpec, VideoClip, generate_clip, load_clip, save_clip

__all__ = [
    "ModelState",
    "init_model_state",
    "load_checkpoint",
    "save_checkpoint",
    "SynthSpec",
    "VideoClip",
    "generate_clip",
    "load_clip",
    "save_clip",
    "__version__",
]
