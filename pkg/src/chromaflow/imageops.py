"""Small resize helpers shared by the pipeline, training, and IO code."""

import numpy as np
import torch


def resize_plane(arr, hw, mode="bilinear"):
    """Resize H x W or H x W x C arrays (numpy or torch) to ``hw``.

    ``mode`` is "bilinear" (align_corners=False) or "area"; area is the right
    choice for integer-ratio downsampling.
    """
    is_np = not torch.is_tensor(arr)
    t = torch.from_numpy(np.ascontiguousarray(arr)) if is_np else arr
    squeeze = t.ndim == 2
    if squeeze:
        t = t.unsqueeze(-1)
    if tuple(t.shape[:2]) == tuple(hw):
        out = t.clone()
    else:
        nchw = t.permute(2, 0, 1).unsqueeze(0)
        kwargs = {"align_corners": False} if mode == "bilinear" else {}
        out = torch.nn.functional.interpolate(nchw, size=tuple(hw), mode=mode, **kwargs)
        out = out.squeeze(0).permute(1, 2, 0)
    if squeeze:
        out = out.squeeze(-1)
    return out.numpy() if is_np else out
