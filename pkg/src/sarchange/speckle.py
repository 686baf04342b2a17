"""Gamma speckle simulation, change injection and ENL estimation.

Intensity images are simulated as reflectivity times unit-mean gamma noise
with shape L (the number of looks). Per-image random streams are spawned
from one master seed with :func:`rng_streams`, so image ``t`` of a stack
does not depend on how many other images are generated or in which order.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import uniform_filter

from .errors import EstimationError, InputError, ParameterError
from .special import trigamma
from .stack import INTENSITY, ChangeClass, ImageStack

__all__ = [
    "ChangeProfile",
    "SimulatedStack",
    "rng_streams",
    "simulate_speckle",
    "build_reflectivity_from_stack",
    "inject_changes",
    "simulate_stack",
    "estimate_enl_logcumulant",
    "temporal_multilook",
    "region_mask",
    "truth_classes",
]


def rng_streams(seed, count: int) -> list[np.random.Generator]:
    """Split a master seed into ``count`` independent generators.

    Stream ``i`` is ``default_rng(SeedSequence(seed).spawn(count)[i])``;
    spawned children only depend on the parent entropy and their own
    index, so stream ``i`` is the same whatever ``count`` is.
    """
    children = np.random.SeedSequence(seed).spawn(count)
    return [np.random.default_rng(child) for child in children]


def _check_reflectivity(reflectivity) -> np.ndarray:
    u = np.asarray(reflectivity, dtype=np.float64)
    if u.size == 0:
        raise InputError("reflectivity map is empty")
    if not np.all(np.isfinite(u)) or np.any(u < 0):
        raise InputError("reflectivity values must be finite and >= 0")
    return u


def simulate_speckle(reflectivity, looks: float, seed) -> np.ndarray:
    """Draw one intensity image from the gamma speckle model.

    Each pixel is ``u * g`` with ``g ~ Gamma(shape=looks, scale=1/looks)``,
    so it has mean ``u`` and variance ``u**2 / looks``.

    Parameters
    ----------
    reflectivity : array_like
        Noise-free reflectivity, any shape.
    looks : float
        Number of looks, > 0. Shapes below 1 are supported.
    seed : int, SeedSequence or Generator
        Random source; a fixed integer gives bit-identical output.
    """
    looks = float(looks)
    if not looks > 0 or not np.isfinite(looks):
        raise ParameterError(f"looks must be positive, got {looks}")
    u = _check_reflectivity(reflectivity)
    rng = np.random.default_rng(seed)
    return u * rng.gamma(looks, 1.0 / looks, size=u.shape)


def build_reflectivity_from_stack(stack) -> np.ndarray:
    """Temporal arithmetic mean of a stack, used as a noise-free reflectivity."""
    images = stack.images if isinstance(stack, ImageStack) else np.asarray(stack, dtype=np.float64)
    if images.ndim == 2:
        images = images[np.newaxis]
    if images.ndim != 3 or images.shape[0] == 0 or images[0].size == 0:
        raise InputError("cannot build a reflectivity map from an empty stack")
    return images.mean(axis=0)


@dataclass(frozen=True)
class ChangeProfile:
    """A multiplicative reflectivity change planted in a region.

    Time indices are 1-based. With ``f = factor``:

    * ``step``: ``f`` for ``t >= onset``.
    * ``impulse``: ``f`` for ``onset <= t < offset``.
    * ``cycle``: starting at ``onset``, alternate blocks of length
      ``offset - onset`` with multiplier ``f`` and 1.
    * ``complex``: ``f`` for ``onset <= t < offset`` and ``factor2``
      (default ``f**2``) for ``t >= offset``.

    ``region`` is either a boolean mask of the image shape or a rectangle
    ``(row0, row1, col0, col1)`` with exclusive ends.
    """

    region: object
    kind: str
    onset: int
    offset: int | None = None
    factor: float = 4.0
    factor2: float | None = None

    def __post_init__(self):
        if self.kind not in ("step", "impulse", "cycle", "complex"):
            raise InputError(f"unknown change kind {self.kind!r}")
        if not self.factor > 0 or (self.factor2 is not None and not self.factor2 > 0):
            raise ParameterError("change factors must be > 0")
        if self.kind != "step" and self.offset is None:
            raise InputError(f"{self.kind} change needs an offset")
        if self.offset is not None and not self.onset < self.offset:
            raise InputError(f"onset {self.onset} must be < offset {self.offset}")
        if self.onset < 2:
            raise InputError("onset must be >= 2 so that the first date is the unchanged state")

    @property
    def change_class(self) -> ChangeClass:
        return ChangeClass[self.kind.upper()]

    def multipliers(self, count: int) -> np.ndarray:
        """Per-date reflectivity multipliers for a series of ``count`` dates."""
        if self.onset > count or (self.offset is not None and self.offset > count):
            raise InputError(f"profile times exceed the series length {count}")
        t = np.arange(1, count + 1)
        out = np.ones(count)
        f = self.factor
        if self.kind == "step":
            out[t >= self.onset] = f
        elif self.kind == "impulse":
            out[(t >= self.onset) & (t < self.offset)] = f
        elif self.kind == "cycle":
            period = self.offset - self.onset
            on = (t >= self.onset) & (((t - self.onset) // period) % 2 == 0)
            out[on] = f
        else:
            out[(t >= self.onset) & (t < self.offset)] = f
            out[t >= self.offset] = f**2 if self.factor2 is None else self.factor2
        return out

    def mask(self, shape: tuple[int, int]) -> np.ndarray:
        return region_mask(self.region, shape)


def region_mask(region, shape: tuple[int, int]) -> np.ndarray:
    """Boolean mask for a rectangle ``(r0, r1, c0, c1)`` or an explicit mask."""
    if isinstance(region, np.ndarray) and region.dtype == bool:
        if region.shape != tuple(shape):
            raise InputError(f"region mask shape {region.shape} != image shape {shape}")
        return region
    try:
        r0, r1, c0, c1 = (int(v) for v in region)
    except (TypeError, ValueError):
        raise InputError(f"region must be a boolean mask or (r0, r1, c0, c1), got {region!r}") from None
    h, w = shape
    if not (0 <= r0 < r1 <= h and 0 <= c0 < c1 <= w):
        raise InputError(f"region {region!r} is outside the {h}x{w} image")
    mask = np.zeros(shape, dtype=bool)
    mask[r0:r1, c0:c1] = True
    return mask


def inject_changes(reflectivity, profiles, count: int):
    """Build a reflectivity time series with planted changes.

    Profiles are applied in list order; where regions overlap the later
    profile wins for every date.

    Returns
    -------
    maps : ndarray, shape (count, H, W)
        Reflectivity for each date.
    truth : ndarray of bool, shape (count, H, W)
        True at (date, pixel) cells whose reflectivity was modified.
    """
    u = _check_reflectivity(reflectivity)
    if u.ndim != 2:
        raise InputError("reflectivity map must be 2-D")
    if count < 1:
        raise InputError("count must be >= 1")
    mult = np.ones((count,) + u.shape)
    for profile in profiles:
        m = profile.mask(u.shape)
        mult[:, m] = profile.multipliers(count)[:, np.newaxis]
    return u[np.newaxis] * mult, mult != 1.0


def truth_classes(profiles, shape: tuple[int, int]) -> np.ndarray:
    """Per-pixel ground-truth change class (later profiles win)."""
    classes = np.zeros(shape, dtype=np.uint8)
    for profile in profiles:
        classes[profile.mask(shape)] = int(profile.change_class)
    return classes


@dataclass(frozen=True, eq=False)
class SimulatedStack:
    """A simulated intensity stack together with its ground truth."""

    images: np.ndarray
    reflectivity: np.ndarray
    truth: np.ndarray
    classes: np.ndarray
    looks: float
    seed: object

    def pair_truth(self, t: int, t2: int) -> np.ndarray:
        """Pixels whose reflectivity differs between 1-based dates t and t2."""
        return self.reflectivity[t - 1] != self.reflectivity[t2 - 1]

    def stack(self, timestamps=None) -> ImageStack:
        return ImageStack(self.images, enl=self.looks, timestamps=timestamps, domain=INTENSITY)


def simulate_stack(reflectivity, profiles, count: int, looks: float, seed) -> SimulatedStack:
    """Simulate ``count`` speckled images of a scene with planted changes."""
    maps, truth = inject_changes(reflectivity, profiles, count)
    streams = rng_streams(seed, count)
    images = np.stack([simulate_speckle(maps[i], looks, streams[i]) for i in range(count)])
    return SimulatedStack(
        images=images,
        reflectivity=maps,
        truth=truth,
        classes=truth_classes(profiles, maps.shape[1:]),
        looks=float(looks),
        seed=seed,
    )


MIN_ENL_SAMPLES = 100
_ENL_BRACKET = (0.1, 1e4)


def estimate_enl_logcumulant(image, region=None) -> float:
    """Estimate the ENL of an intensity image with the log-cumulant method.

    For gamma-distributed intensity the second log-cumulant is
    ``kappa2 = trigamma(L)``; the sample variance of ``log(y)`` over a
    homogeneous region is inverted by bisection on ``L in [0.1, 1e4]``.

    Parameters
    ----------
    image : array_like
        Intensity values.
    region : optional
        Boolean mask, rectangle ``(r0, r1, c0, c1)`` or None for all pixels.
    """
    y = np.asarray(image, dtype=np.float64)
    if region is not None:
        y = y[region_mask(region, y.shape)]
    y = y.reshape(-1)
    if y.size < MIN_ENL_SAMPLES:
        raise EstimationError(f"need at least {MIN_ENL_SAMPLES} samples, got {y.size}")
    if np.any(y <= 0) or not np.all(np.isfinite(y)):
        raise EstimationError("log-cumulant estimation requires positive finite intensities")
    kappa2 = float(np.var(np.log(y), ddof=1))
    lo, hi = _ENL_BRACKET
    if not kappa2 > 0:
        raise EstimationError("second log-cumulant is zero: constant input")
    if not trigamma(hi) < kappa2 < trigamma(lo):
        raise EstimationError(f"kappa2={kappa2:.3g} is outside the ENL bracket [{lo}, {hi}]")
    # trigamma is decreasing; bisect in log space.
    a, b = np.log(lo), np.log(hi)
    for _ in range(200):
        mid = 0.5 * (a + b)
        if trigamma(np.exp(mid)) > kappa2:
            a = mid
        else:
            b = mid
        if b - a < 1e-13:
            break
    return float(np.exp(0.5 * (a + b)))


def temporal_multilook(stack: ImageStack, window: int) -> ImageStack:
    """Boxcar-average every image of a stack; the baseline denoiser.

    The output ENL is ``stack.enl * window**2``, which is exact for
    homogeneous areas only. Borders use mirror reflection.
    """
    if not isinstance(window, (int, np.integer)) or window < 1 or window % 2 == 0:
        raise ParameterError(f"window must be a positive odd integer, got {window!r}")
    h, w = stack.shape
    if window > min(h, w):
        raise InputError(f"window {window} is larger than the {h}x{w} image")
    if window == 1:
        return stack
    filtered = uniform_filter(stack.images, size=(1, window, window), mode="reflect")
    np.maximum(filtered, 0.0, out=filtered)
    return stack.with_images(filtered, enl=stack.enl * window * window)
