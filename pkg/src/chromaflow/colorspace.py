"""Conversion between display sRGB and the normalized CIE Lab planes used in the pipeline.

Internally everything runs on normalized Lab: the luminance plane is L/100 and the
two chrominance planes are (a+128)/255 and (b+128)/255, all clamped to [0, 1].
Neutral gray therefore encodes to ab = 128/255 on both chrominance planes.
"""

import numpy as np

from .errors import ValidationError

# D65 white point, 2-degree observer
_WHITE = np.array([0.95047, 1.0, 1.08883])

_RGB_TO_XYZ = np.array(
    [
        [0.4124564, 0.3575761, 0.1804375],
        [0.2126729, 0.7151522, 0.0721750],
        [0.0193339, 0.1191920, 0.9503041],
    ]
)
_XYZ_TO_RGB = np.linalg.inv(_RGB_TO_XYZ)

# value both chrominance planes take on the neutral (a = b = 0) axis
NEUTRAL_AB = 128.0 / 255.0


def _check_image(arr, channels, name):
    arr = np.asarray(arr, dtype=np.float64)
    expected_ndim = 2 if channels == 1 else 3
    if arr.ndim != expected_ndim or (channels > 1 and arr.shape[2] != channels):
        raise ValidationError(f"{name}: expected H x W x {channels} array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name}: contains non-finite values")
    return arr


def _srgb_to_linear(v):
    return np.where(v <= 0.04045, v / 12.92, ((v + 0.055) / 1.055) ** 2.4)


def _linear_to_srgb(v):
    v = np.clip(v, 0.0, None)
    return np.where(v <= 0.0031308, v * 12.92, 1.055 * v ** (1.0 / 2.4) - 0.055)


def _lab_f(t):
    delta = 6.0 / 29.0
    return np.where(t > delta**3, np.cbrt(t), t / (3 * delta**2) + 4.0 / 29.0)


def _lab_f_inv(ft):
    delta = 6.0 / 29.0
    return np.where(ft > delta, ft**3, 3 * delta**2 * (ft - 4.0 / 29.0))


def rgb_to_lab(img):
    """Convert an H x W x 3 sRGB image in [0,1] to (gray, ab) normalized Lab planes.

    Returns a pair: gray of shape H x W (L/100) and ab of shape H x W x 2
    ((a+128)/255, (b+128)/255), each clamped to [0, 1].
    """
    img = _check_image(img, 3, "rgb")
    if img.min() < 0.0 or img.max() > 1.0:
        raise ValidationError("rgb: values outside [0, 1]")
    xyz = _srgb_to_linear(img) @ _RGB_TO_XYZ.T
    f = _lab_f(xyz / _WHITE)
    lum = 116.0 * f[..., 1] - 16.0
    a = 500.0 * (f[..., 0] - f[..., 1])
    b = 200.0 * (f[..., 1] - f[..., 2])
    gray = np.clip(lum / 100.0, 0.0, 1.0)
    ab = np.clip(np.stack([(a + 128.0) / 255.0, (b + 128.0) / 255.0], axis=-1), 0.0, 1.0)
    return gray, ab


def lab_to_rgb(gray, ab):
    """Invert :func:`rgb_to_lab`; out-of-gamut results are clamped to [0, 1]."""
    gray = _check_image(gray, 1, "gray")
    ab = _check_image(ab, 2, "ab")
    if gray.shape != ab.shape[:2]:
        raise ValidationError(f"gray {gray.shape} and ab {ab.shape[:2]} resolutions differ")
    lum = gray * 100.0
    a = ab[..., 0] * 255.0 - 128.0
    b = ab[..., 1] * 255.0 - 128.0
    fy = (lum + 16.0) / 116.0
    fx = fy + a / 500.0
    fz = fy - b / 200.0
    xyz = np.stack([_lab_f_inv(fx), _lab_f_inv(fy), _lab_f_inv(fz)], axis=-1) * _WHITE
    rgb = _linear_to_srgb(xyz @ _XYZ_TO_RGB.T)
    return np.clip(rgb, 0.0, 1.0)


def neutral_ab(hw):
    """All-neutral chrominance planes of resolution ``hw``."""
    h, w = hw
    return np.full((h, w, 2), NEUTRAL_AB, dtype=np.float64)
