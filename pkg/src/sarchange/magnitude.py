"""Signed change-magnitude index and its rainbow rendering."""
from __future__ import annotations

import colorsys

import numpy as np

from .errors import ParameterError

__all__ = [
    "ALPHA1",
    "ALPHA2",
    "round_half_away",
    "normalize_magnitude",
    "signed_magnitude",
    "rainbow_table",
    "rainbow_colorize",
]

ALPHA1 = -2.0
ALPHA2 = 2.0


def round_half_away(x):
    """Round to the nearest integer, halves away from zero."""
    x = np.asarray(x, dtype=np.float64)
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


def normalize_magnitude(s, alpha1: float = ALPHA1, alpha2: float = ALPHA2):
    """Map a dissimilarity to an integer in [0, 255].

    ``v = 2 (s - alpha1) / (alpha2 - alpha1)``; ``v >= 2`` saturates at 255,
    otherwise the result is ``round(127 v + 1)`` clipped to [0, 255].
    Non-finite (saturated) inputs map to 255.
    """
    if not alpha2 > alpha1:
        raise ParameterError(f"alpha2 ({alpha2}) must exceed alpha1 ({alpha1})")
    s = np.asarray(s, dtype=np.float64)
    with np.errstate(invalid="ignore"):
        v = 2.0 * (s - alpha1) / (alpha2 - alpha1)
        scaled = np.clip(round_half_away(127.0 * np.where(np.isfinite(v), v, 0.0) + 1.0), 0, 255)
    out = np.where((v >= 2.0) | np.isposinf(v), 255, scaled).astype(np.int16)
    return int(out) if out.ndim == 0 else out


def signed_magnitude(s, sign, alpha1: float = ALPHA1, alpha2: float = ALPHA2):
    """Normalized magnitude times the change sign, in [-255, 255]."""
    out = np.asarray(normalize_magnitude(s, alpha1, alpha2), dtype=np.int16) * np.asarray(sign, dtype=np.int16)
    return int(out) if out.ndim == 0 else out.astype(np.int16)


def rainbow_table() -> np.ndarray:
    """The 511-entry RGB lookup table indexed by ``value + 255``.

    Entries sweep the HSV hue from 240 degrees (blue, value -255) to 0
    degrees (red, value +255) at full saturation and value. The centre
    entry (value 0, no change) is white.
    """
    table = np.empty((511, 3), dtype=np.uint8)
    for i in range(511):
        hue = (240.0 - 240.0 * i / 510.0) / 360.0
        r, g, b = colorsys.hsv_to_rgb(hue, 1.0, 1.0)
        table[i] = [int(round_half_away(255.0 * c)) for c in (r, g, b)]
    table[255] = 255
    return table


_TABLE = rainbow_table()


def rainbow_colorize(magnitude) -> np.ndarray:
    """Render a signed magnitude map to an (H, W, 3) uint8 RGB image."""
    m = np.clip(np.asarray(magnitude, dtype=np.int64), -255, 255)
    return _TABLE[m + 255]
