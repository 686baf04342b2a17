"""Per-pixel temporal change-type classification.

Pipeline for each pixel: optional EWMA smoothing, the M x M change
criterion matrix of pairwise GLR values, binarization into an affinity
(1 = no significant change between the two dates), spectral clustering
of the dates, and a mapping of the label series to a change class.

Binary affinities repeat heavily across an image, so the spectral step
runs once per distinct affinity pattern with a fixed seed. The result
therefore does not depend on pixel order.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError, ParameterError
from .glr import change_probability, s_glr
from .spectral import LabelSeries, spectral_labels_batch
from .stack import ChangeClass, ImageStack

__all__ = [
    "ChangeClass",
    "CLASS_COLORS",
    "ewma_smooth",
    "build_ccm",
    "binarize_ccm",
    "classify_series",
    "ClassificationResult",
    "classify_stack",
    "colorize_classes",
]

# white: none, red: step, green: impulse, blue: cycle, cyan: complex
CLASS_COLORS = np.array(
    [
        [255, 255, 255],
        [255, 0, 0],
        [0, 255, 0],
        [0, 0, 255],
        [0, 255, 255],
    ],
    dtype=np.uint8,
)


def ewma_smooth(series, alpha: float = 0.3):
    """Exponentially weighted moving average along the first axis.

    ``y[0] = x[0]`` and ``y[t] = alpha x[t] + (1 - alpha) y[t-1]``.
    """
    if not 0.0 < alpha <= 1.0:
        raise ParameterError(f"alpha must lie in (0, 1], got {alpha}")
    x = np.asarray(series, dtype=np.float64)
    if x.ndim == 0 or x.shape[0] == 0:
        raise InputError("cannot smooth an empty series")
    y = np.empty_like(x)
    y[0] = x[0]
    for t in range(1, x.shape[0]):
        y[t] = alpha * x[t] + (1.0 - alpha) * y[t - 1]
    return y


def build_ccm(series, enl: float) -> np.ndarray:
    """Change criterion matrix ``C[t, t'] = s_glr(u_t, u_t', enl)``.

    ``series`` has the dates on its last axis, so a (N, M) array gives a
    (N, M, M) batch. Zero values give saturated (``inf``) entries.
    """
    x = np.asarray(series, dtype=np.float64)
    if x.shape[-1] < 2:
        raise InputError("a change criterion matrix needs at least two dates")
    return s_glr(x[..., :, np.newaxis], x[..., np.newaxis, :], enl)


def binarize_ccm(ccm, enl: float, tau: float = 0.99) -> np.ndarray:
    """Affinity: 1 where the change probability is below ``tau``; unit diagonal."""
    if not 0.0 < tau < 1.0:
        raise ParameterError(f"tau must lie in (0, 1), got {tau}")
    c = np.asarray(ccm, dtype=np.float64)
    affinity = (np.asarray(change_probability(c, enl)) < tau).astype(np.uint8)
    idx = np.arange(c.shape[-1])
    affinity[..., idx, idx] = 1
    return affinity


def classify_series(labels) -> ChangeClass:
    """Change class of a label series.

    ``k == 1`` is unchanged and ``k >= 3`` complex. For two clusters the
    number of label transitions decides: one is a step, two with equal
    end labels an impulse, anything else a cycle.
    """
    if isinstance(labels, LabelSeries):
        seq, k = labels.labels, labels.k
    else:
        seq = tuple(int(v) for v in labels)
        k = len(set(seq))
    if k <= 1:
        return ChangeClass.UNCHANGED
    if k >= 3:
        return ChangeClass.COMPLEX
    transitions = sum(1 for a, b in zip(seq, seq[1:]) if a != b)
    if transitions == 1:
        return ChangeClass.STEP
    if transitions == 2 and seq[0] == seq[-1]:
        return ChangeClass.IMPULSE
    return ChangeClass.CYCLE


@dataclass(frozen=True, eq=False)
class ClassificationResult:
    classes: np.ndarray
    clusters: np.ndarray
    labels: np.ndarray
    zero_rows: np.ndarray

    def rgb(self) -> np.ndarray:
        return colorize_classes(self.classes)


def colorize_classes(classes) -> np.ndarray:
    return CLASS_COLORS[np.asarray(classes, dtype=np.intp)]


def classify_stack(stack: ImageStack, tau: float = 0.99, ewma_alpha: float | None = None, seed=0) -> ClassificationResult:
    """Classify the temporal change type of every pixel of a stack.

    Returns the class raster (uint8 codes of :class:`ChangeClass`), the
    cluster count per pixel and the per-date label series ``(M, H, W)``.
    """
    if stack.count < 2:
        raise InputError("classification needs at least two dates")
    intensity = stack.intensity()
    m = intensity.count
    h, w = intensity.shape
    series = intensity.images.reshape(m, -1)
    if ewma_alpha is not None:
        series = ewma_smooth(series, ewma_alpha)
    affinity = binarize_ccm(build_ccm(series.T, intensity.enl), intensity.enl, tau)
    patterns, inverse = np.unique(affinity.reshape(affinity.shape[0], -1), axis=0, return_inverse=True)
    inverse = inverse.reshape(-1)
    results = spectral_labels_batch(patterns.reshape(-1, m, m), seed=seed)
    pattern_class = np.array([int(classify_series(r)) for r in results], dtype=np.uint8)
    pattern_k = np.array([r.k for r in results], dtype=np.int32)
    pattern_labels = np.array([r.labels for r in results], dtype=np.int32).reshape(-1, m)
    pattern_zero = np.array([r.zero_rows for r in results], dtype=bool)
    return ClassificationResult(
        classes=pattern_class[inverse].reshape(h, w),
        clusters=pattern_k[inverse].reshape(h, w),
        labels=pattern_labels[inverse].T.reshape(m, h, w),
        zero_rows=pattern_zero[inverse].reshape(h, w),
    )
