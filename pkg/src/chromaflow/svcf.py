"""Reader/writer for the raw little-endian flow file format (.svcf).

Layout: 4 magic bytes "SVCF", u32 width, u32 height, then height*width*2
float32 values in row-major order, channel order (dx, dy), units of pixels.
"""

import struct

import numpy as np

from .errors import ClipLoadError

MAGIC = b"SVCF"


def write_svcf(path, flow):
    flow = np.ascontiguousarray(flow, dtype="<f4")
    if flow.ndim != 3 or flow.shape[2] != 2:
        raise ValueError(f"flow must be H x W x 2, got {flow.shape}")
    h, w = flow.shape[:2]
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", w, h))
        fh.write(flow.tobytes())


def read_svcf(path):
    with open(path, "rb") as fh:
        header = fh.read(12)
        if len(header) < 12 or header[:4] != MAGIC:
            raise ClipLoadError(f"{path}: not a valid flow file (bad magic)")
        w, h = struct.unpack("<II", header[4:12])
        payload = fh.read(h * w * 2 * 4)
    if len(payload) != h * w * 2 * 4:
        raise ClipLoadError(f"{path}: truncated flow payload")
    return np.frombuffer(payload, dtype="<f4").reshape(h, w, 2).copy()
