"""Multitemporal image stack container."""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import IntEnum

import numpy as np

from .errors import InputError, ParameterError

INTENSITY = "intensity"
AMPLITUDE = "amplitude"
DOMAINS = (INTENSITY, AMPLITUDE)


class ChangeClass(IntEnum):
    """Temporal change types; values are the label-raster codes."""

    UNCHANGED = 0
    STEP = 1
    IMPULSE = 2
    CYCLE = 3
    COMPLEX = 4


@dataclass(frozen=True, eq=False)
class ImageStack:
    """An ordered stack of co-registered rasters.

    Parameters
    ----------
    images : array_like, shape (M, H, W)
        Nonnegative pixel values, one raster per acquisition.
    enl : float
        Equivalent number of looks shared by every pixel of every image.
    timestamps : array_like, shape (M,), optional
        Strictly increasing acquisition times in days. Defaults to 0..M-1.
    domain : {"intensity", "amplitude"}
        Whether pixels are intensities or amplitudes (square roots).
    dates : tuple of str, optional
        ISO-8601 labels carried through from a manifest.

    Time indices exposed by the rest of the package are 1-based, so that
    0 can mean "no time" in index maps.
    """

    images: np.ndarray
    enl: float
    timestamps: np.ndarray = None
    domain: str = INTENSITY
    dates: tuple = field(default=())

    def __post_init__(self):
        images = np.asarray(self.images, dtype=np.float64)
        if images.ndim == 2:
            images = images[np.newaxis]
        if images.ndim != 3 or images.shape[0] < 1:
            raise InputError(f"stack must have shape (M, H, W) with M >= 1, got {images.shape}")
        if images.shape[1] * images.shape[2] == 0:
            raise InputError("stack images must have at least one pixel")
        if not np.all(np.isfinite(images)) or np.any(images < 0):
            raise InputError("stack pixel values must be finite and >= 0")
        if self.domain not in DOMAINS:
            raise InputError(f"domain must be one of {DOMAINS}, got {self.domain!r}")
        enl = float(self.enl)
        if not enl > 0 or not np.isfinite(enl):
            raise ParameterError(f"enl must be a positive finite number, got {self.enl}")
        if self.timestamps is None:
            ts = np.arange(images.shape[0], dtype=np.float64)
        else:
            ts = np.asarray(self.timestamps, dtype=np.float64).reshape(-1)
        if ts.shape[0] != images.shape[0]:
            raise InputError(f"{ts.shape[0]} timestamps for {images.shape[0]} images")
        if np.any(np.diff(ts) <= 0):
            raise InputError("timestamps must be strictly increasing")
        if self.dates and len(self.dates) != images.shape[0]:
            raise InputError("dates must have one entry per image")
        images.setflags(write=False)
        ts.setflags(write=False)
        object.__setattr__(self, "images", images)
        object.__setattr__(self, "timestamps", ts)
        object.__setattr__(self, "enl", enl)
        object.__setattr__(self, "dates", tuple(self.dates))

    @property
    def count(self) -> int:
        return self.images.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.images.shape[1], self.images.shape[2]

    def image(self, t: int) -> np.ndarray:
        """Return the raster at 1-based time index ``t``."""
        return self.images[self.check_index(t) - 1]

    def check_index(self, t: int) -> int:
        if not isinstance(t, (int, np.integer)) or not 1 <= t <= self.count:
            raise InputError(f"time index must be an integer in [1, {self.count}], got {t!r}")
        return int(t)

    def intensity(self) -> "ImageStack":
        if self.domain == INTENSITY:
            return self
        return replace(self, images=self.images**2, domain=INTENSITY)

    def amplitude(self) -> "ImageStack":
        if self.domain == AMPLITUDE:
            return self
        return replace(self, images=np.sqrt(self.images), domain=AMPLITUDE)

    def with_images(self, images, enl: float | None = None) -> "ImageStack":
        return replace(self, images=images, enl=self.enl if enl is None else enl)
