"""Color scribbles: sampling from ground truth, rasterization, JSON exchange,
and flow-based propagation to later frames.

A scribble map is an H x W x 3 raster of (a, b, validity) planes. Invalid
pixels carry the neutral chrominance encoding so the networks can tell
"no hint" from "hint = gray" via the validity plane.
"""

import json
from dataclasses import dataclass

import numpy as np

from .colorspace import NEUTRAL_AB
from .errors import ValidationError

MAX_SCRIBBLES = 40
DEFAULT_RADIUS = 2


@dataclass
class ScribblePoint:
    x: int
    y: int
    a: float
    b: float


def empty_scribble_map(hw):
    h, w = hw
    out = np.zeros((h, w, 3), dtype=np.float64)
    out[..., 0] = NEUTRAL_AB
    out[..., 1] = NEUTRAL_AB
    return out


def sample_scribbles(gt_ab, count, radius=DEFAULT_RADIUS, rng=None):
    """Pick ``count`` distinct hint locations uniformly (margin >= radius from
    borders), each carrying the ground-truth chrominance at its center."""
    if not (0 <= count <= MAX_SCRIBBLES):
        raise ValidationError(f"scribble count must be in [0, {MAX_SCRIBBLES}], got {count}")
    if count == 0:
        return []
    rng = rng if rng is not None else np.random.default_rng()
    h, w = gt_ab.shape[:2]
    xs = np.arange(radius, w - radius)
    ys = np.arange(radius, h - radius)
    if len(xs) == 0 or len(ys) == 0:
        raise ValidationError(f"radius {radius} leaves no interior in {h}x{w}")
    flat = rng.choice(len(xs) * len(ys), size=count, replace=False)
    points = []
    for f in flat:
        y = ys[f // len(xs)]
        x = xs[f % len(xs)]
        points.append(ScribblePoint(int(x), int(y), float(gt_ab[y, x, 0]), float(gt_ab[y, x, 1])))
    return points


def rasterize(points, hw, radius=DEFAULT_RADIUS):
    """Paint each point as a filled (2*radius+1)^2 square; later points win."""
    h, w = hw
    out = empty_scribble_map(hw)
    for p in points:
        if not (0 <= p.x < w and 0 <= p.y < h):
            raise ValidationError(f"scribble point ({p.x}, {p.y}) outside {h}x{w}")
        if not (0.0 <= p.a <= 1.0 and 0.0 <= p.b <= 1.0):
            raise ValidationError(f"scribble chrominance ({p.a}, {p.b}) outside [0, 1]")
        y0, y1 = max(0, p.y - radius), min(h, p.y + radius + 1)
        x0, x1 = max(0, p.x - radius), min(w, p.x + radius + 1)
        out[y0:y1, x0:x1, 0] = p.a
        out[y0:y1, x0:x1, 1] = p.b
        out[y0:y1, x0:x1, 2] = 1.0
    return out


def propagate_scribbles(map_t, flow_t_to_t1):
    """Forward-splat every valid hint pixel to round(p + flow(p)).

    Destinations outside the frame are dropped; colliding sources resolve by
    scan order (row-major, last writer wins). Invalid pixels stay neutral.
    """
    if map_t.shape[:2] != flow_t_to_t1.shape[:2]:
        raise ValidationError(
            f"scribble map {map_t.shape[:2]} and flow {flow_t_to_t1.shape[:2]} resolutions differ"
        )
    h, w = map_t.shape[:2]
    out = empty_scribble_map((h, w))
    ys, xs = np.nonzero(map_t[..., 2] > 0.5)
    for y, x in zip(ys, xs):
        tx = int(np.rint(x + flow_t_to_t1[y, x, 0]))
        ty = int(np.rint(y + flow_t_to_t1[y, x, 1]))
        if 0 <= tx < w and 0 <= ty < h:
            out[ty, tx, 0] = map_t[y, x, 0]
            out[ty, tx, 1] = map_t[y, x, 1]
            out[ty, tx, 2] = 1.0
    return out


# ---------------------------------------------------------------------------
# JSON exchange format used by the CLI, service, and UI
# ---------------------------------------------------------------------------

def scribbles_to_json(points, hw, radius=DEFAULT_RADIUS):
    return {
        "resolution": [int(hw[0]), int(hw[1])],
        "radius": int(radius),
        "points": [
            {"x": int(p.x), "y": int(p.y), "a": float(p.a), "b": float(p.b)} for p in points
        ],
    }


def scribbles_from_json(payload):
    """Parse and validate the scribble JSON; returns (points, hw, radius).

    Raises ValidationError naming the first offending point index.
    """
    if isinstance(payload, (str, bytes)):
        payload = json.loads(payload)
    try:
        h, w = (int(v) for v in payload["resolution"])
        radius = int(payload.get("radius", DEFAULT_RADIUS))
        raw_points = payload["points"]
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError(f"malformed scribble JSON: {exc}") from exc
    points = []
    for idx, rp in enumerate(raw_points):
        try:
            p = ScribblePoint(int(rp["x"]), int(rp["y"]), float(rp["a"]), float(rp["b"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"point {idx}: malformed entry ({exc})") from exc
        if not (0 <= p.x < w and 0 <= p.y < h):
            raise ValidationError(f"point {idx}: ({p.x}, {p.y}) outside resolution {h}x{w}")
        if not (0.0 <= p.a <= 1.0 and 0.0 <= p.b <= 1.0):
            raise ValidationError(f"point {idx}: chrominance ({p.a}, {p.b}) outside [0, 1]")
        points.append(p)
    if len(points) > MAX_SCRIBBLES:
        raise ValidationError(f"{len(points)} points exceed the {MAX_SCRIBBLES}-point budget")
    return points, (h, w), radius
