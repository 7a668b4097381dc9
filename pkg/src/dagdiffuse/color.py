"""sRGB <-> CIE L*a*b* (D65 white, 2 degree observer)."""

import numpy as np

from .errors import ChannelMismatch

# IEC 61966-2-1 linear sRGB -> XYZ
RGB_TO_XYZ = np.array([
    [0.4124564, 0.3575761, 0.1804375],
    [0.2126729, 0.7151522, 0.0721750],
    [0.0193339, 0.1191920, 0.9503041],
])
XYZ_TO_RGB = np.linalg.inv(RGB_TO_XYZ)
# white point = image of RGB (1, 1, 1), so white maps to a = b = 0
WHITE_D65 = RGB_TO_XYZ.sum(axis=1)

_DELTA = 6.0 / 29.0


def _check(img):
    img = np.asarray(img, dtype=np.float64)
    if img.shape[-1] != 3:
        raise ChannelMismatch(f"expected 3 channels, got shape {img.shape}")
    return img


def srgb_to_linear(c):
    return np.where(c <= 0.04045, c / 12.92, ((c + 0.055) / 1.055) ** 2.4)


def linear_to_srgb(c):
    c = np.clip(c, 0.0, None)
    return np.where(c <= 0.0031308, 12.92 * c, 1.055 * c ** (1 / 2.4) - 0.055)


def _f(t):
    return np.where(t > _DELTA ** 3, np.cbrt(t), t / (3 * _DELTA ** 2) + 4.0 / 29.0)


def _finv(t):
    return np.where(t > _DELTA, t ** 3, 3 * _DELTA ** 2 * (t - 4.0 / 29.0))


def rgb_to_lab(img):
    """``(..., 3)`` sRGB in ``[0, 1]`` to ``(..., 3)`` L*a*b*; L in ``[0, 100]``."""
    img = _check(img)
    xyz = srgb_to_linear(img) @ RGB_TO_XYZ.T
    fx, fy, fz = np.moveaxis(_f(xyz / WHITE_D65), -1, 0)
    return np.stack([116 * fy - 16, 500 * (fx - fy), 200 * (fy - fz)], axis=-1)


def lab_to_rgb(lab):
    """Inverse of :func:`rgb_to_lab`, clamped to ``[0, 1]``."""
    lab = _check(lab)
    L, a, b = np.moveaxis(lab, -1, 0)
    fy = (L + 16) / 116
    f = np.stack([fy + a / 500, fy, fy - b / 200], axis=-1)
    xyz = _finv(f) * WHITE_D65
    return np.clip(linear_to_srgb(xyz @ XYZ_TO_RGB.T), 0.0, 1.0)
