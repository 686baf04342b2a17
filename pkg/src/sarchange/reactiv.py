"""Change-time detection and HSV change-time composites.

Hue encodes a time of interest (start, maximum or stop of a change, or
the date of the maximum amplitude), saturation the temporal coefficient
of variation of the amplitude normalized by its theoretical pure-speckle
mean and standard deviation, and value the maximum amplitude.

Coefficient-of-variation statistics work on amplitudes; change times are
found with the GLR on intensities. Time indices are 1-based, 0 = none.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InputError, ParameterError
from .glr import change_probability, s_glr
from .stack import ImageStack

__all__ = [
    "NakagamiMoments",
    "nakagami_moments",
    "hue_from_time",
    "detect_time_start",
    "detect_time_max",
    "detect_time_stop",
    "coeff_variation_empirical",
    "gamma_theoretical",
    "var_gamma",
    "var_gamma_moments",
    "normalize_saturation",
    "value_channel",
    "hsv_to_rgb",
    "ReactivComposite",
    "compose_reactiv",
    "colorbar",
    "MODES",
    "HUE_SPAN",
]

HUE_SPAN = 5.0 / 6.0
MODES = ("max_value", "start", "max_change", "stop")


# B_2, B_4, ..., B_20
_BERNOULLI = (
    1.0 / 6, -1.0 / 30, 1.0 / 42, -1.0 / 30, 5.0 / 66,
    -691.0 / 2730, 7.0 / 6, -3617.0 / 510, 43867.0 / 798, -174611.0 / 330,
)


def _log_rho(looks):
    """``log(Gamma(L + 1/2)**2 / (L Gamma(L)**2))``, accurate for large ``L``.

    The value tends to ``-1/(4L)``. It is summed from the asymptotic
    expansion of the log-gamma difference once ``L >= 8``; smaller ``L``
    are shifted up with the recurrence ``Gamma(x + 1) = x Gamma(x)``, so
    that ``1 - rho`` keeps full relative precision everywhere.
    """
    looks = np.asarray(looks, dtype=np.float64)
    x = looks.copy()
    shift = np.zeros_like(x)
    while np.any(x < 8.0):
        low = x < 8.0
        xl = x[low]
        shift[low] += 0.5 * np.log1p(1.0 / xl) - np.log1p(0.5 / xl)
        x[low] = xl + 1.0
    series = np.zeros_like(x)
    for k, b in enumerate(_BERNOULLI, start=1):
        series += (2.0 ** (1 - 2 * k) - 2.0) * b / (2 * k * (2 * k - 1) * x ** (2 * k - 1))
    return 2.0 * (series + shift)


def _check_looks(looks):
    arr = np.asarray(looks, dtype=np.float64)
    if np.any(~(arr > 0)):
        raise ParameterError(f"looks must be > 0, got {looks}")
    return arr


@dataclass(frozen=True)
class NakagamiMoments:
    """Raw moments ``m1..m4`` of a Nakagami (speckled amplitude) variable."""

    m1: float
    m2: float
    m3: float
    m4: float
    scale: float
    looks: float


def nakagami_moments(looks: float, scale: float = 1.0) -> NakagamiMoments:
    """Moments of the amplitude ``A = sqrt(I)``, ``I ~ Gamma(L, scale**2 / L)``.

    ``E[A^n] = scale^n Gamma(L + n/2) / (L^(n/2) Gamma(L))``, so that
    ``m2 = scale**2``.
    """
    looks = float(_check_looks(looks))
    lg0 = math.lgamma(looks)

    def moment(n):
        return scale**n * math.exp(math.lgamma(looks + 0.5 * n) - lg0 - 0.5 * n * math.log(looks))

    return NakagamiMoments(moment(1), moment(2), moment(3), moment(4), float(scale), looks)


def hue_from_time(t, t1, t2):
    """Hue ``(5/6) (t - t1) / (t2 - t1)`` for a time inside ``[t1, t2]``."""
    if not t2 > t1:
        raise InputError(f"need t1 < t2, got t1={t1}, t2={t2}")
    t = np.asarray(t, dtype=np.float64)
    if np.any(t < t1) or np.any(t > t2):
        raise InputError(f"time outside [{t1}, {t2}]")
    hue = HUE_SPAN * (t - t1) / (t2 - t1)
    return float(hue) if hue.ndim == 0 else hue


def _series(series):
    x = np.asarray(series, dtype=np.float64)
    if x.ndim == 0 or x.shape[0] < 2:
        raise InputError("change-time detection needs at least two dates")
    return x


def _scalar_or_array(x):
    x = np.asarray(x)
    return int(x) if x.ndim == 0 else x


def detect_time_start(series, enl: float, tau: float = 0.99):
    """First date ``t in (1, M]`` significantly different from date 1, else 0.

    ``series`` holds intensities with the dates on the first axis.
    """
    x = _series(series)
    prob = np.asarray(change_probability(s_glr(x[:1], x[1:], enl), enl))
    hit = prob > tau
    first = np.argmax(hit, axis=0) + 2
    return _scalar_or_array(np.where(hit.any(axis=0), first, 0))


def detect_time_max(series, enl: float):
    """Date ``t'`` maximizing the GLR of the adjacent pair ``(t' - 1, t')``.

    Ties go to the earliest date; a constant series gives 0.
    """
    x = _series(series)
    s = np.asarray(s_glr(x[:-1], x[1:], enl))
    best = np.argmax(s, axis=0)
    peak = np.take_along_axis(s, best[np.newaxis], axis=0)[0]
    return _scalar_or_array(np.where(peak > 0, best + 2, 0))


def detect_time_stop(series, enl: float, tau: float = 0.99):
    """Latest date ``t < M`` significantly different from the last date, else 0.

    Dates are scanned backwards from ``M - 1``; the returned date is the
    last one before the series settles into its final state.
    """
    x = _series(series)
    prob = np.asarray(change_probability(s_glr(x[:-1], x[-1:], enl), enl))
    hit = prob > tau
    m = x.shape[0]
    last = (m - 1) - np.argmax(hit[::-1], axis=0)
    return _scalar_or_array(np.where(hit.any(axis=0), last, 0))


def coeff_variation_empirical(amplitudes):
    """Population standard deviation over mean along the first (time) axis.

    Returns ``nan`` where the mean is zero (undefined pixel).
    """
    x = np.asarray(amplitudes, dtype=np.float64)
    if x.ndim == 0 or x.shape[0] < 2:
        raise InputError("coefficient of variation needs at least two samples")
    mean = x.mean(axis=0)
    std = x.std(axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        cv = np.where(mean > 0, std / np.where(mean > 0, mean, 1.0), np.nan)
    return float(cv) if cv.ndim == 0 else cv


def gamma_theoretical(looks):
    """Coefficient of variation of pure-speckle amplitude with ``L`` looks.

    ``sqrt(Gamma(L) Gamma(L + 1) / Gamma(L + 1/2)**2 - 1)``.
    """
    looks = _check_looks(looks)
    log_rho = _log_rho(looks)
    # 1 / rho - 1 = expm1(-log rho)
    out = np.sqrt(np.expm1(-log_rho))
    return float(out) if out.ndim == 0 else out


def var_gamma(looks, count: int):
    """Closed-form variance of the empirical coefficient of variation.

    ``count`` is the number of dates. With ``r = Gamma(L + 1/2) / Gamma(L)``,
    this is ``L (4L^2 - 4L r^2 - r^2) / (4 count r^4 (L - r^2))``, evaluated
    as ``((4L + 1) d - 1) / (4 count L rho^2 d)`` with ``rho = r^2 / L`` and
    ``d = 1 - rho`` to limit cancellation at large ``L``.
    """
    if count < 2:
        raise ParameterError(f"count must be >= 2, got {count}")
    looks = _check_looks(looks)
    log_rho = _log_rho(looks)
    rho = np.exp(log_rho)
    d = -np.expm1(log_rho)
    out = ((4.0 * looks + 1.0) * d - 1.0) / (4.0 * count * looks * rho**2 * d)
    return float(out) if out.ndim == 0 else out


def var_gamma_moments(moments: NakagamiMoments, count: int) -> float:
    """Delta-method variance of the coefficient of variation from raw moments."""
    m1, m2, m3, m4 = moments.m1, moments.m2, moments.m3, moments.m4
    num = 4.0 * m2**3 - m2**2 * m1**2 + m1**2 * m4 - 4.0 * m1 * m2 * m3
    return num / (4.0 * count * m1**4 * (m2 - m1**2))


def normalize_saturation(gamma, looks: float, count: int):
    """``(gamma - E[gamma]) / (10 sd[gamma]) + 0.25`` clipped to [0, 1].

    Undefined (nan) coefficients give 0.
    """
    g = np.asarray(gamma, dtype=np.float64)
    sat = (g - gamma_theoretical(looks)) / (10.0 * math.sqrt(var_gamma(looks, count))) + 0.25
    sat = np.clip(np.where(np.isnan(sat), 0.0, sat), 0.0, 1.0)
    return float(sat) if sat.ndim == 0 else sat


def value_channel(amplitudes, percentile: float = 99.0):
    """Per-pixel temporal maximum divided by the global ``percentile`` amplitude."""
    x = np.asarray(amplitudes, dtype=np.float64)
    if x.ndim == 0 or x.shape[0] == 0:
        raise InputError("value channel needs a non-empty stack")
    peak = x.max(axis=0)
    scale = float(np.percentile(x, percentile))
    if scale <= 0:
        return np.zeros_like(peak)
    return np.clip(peak / scale, 0.0, 1.0)


def hsv_to_rgb(h, s, v) -> np.ndarray:
    """Vectorized HSV to RGB with all channels in [0, 1].

    With ``i = floor(6h) mod 6`` and ``f = 6h - floor(6h)``:
    ``p = v(1-s)``, ``q = v(1-sf)``, ``t = v(1-s(1-f))`` and
    ``(r, g, b)`` is ``(v,t,p), (q,v,p), (p,v,t), (p,q,v), (t,p,v), (v,p,q)``
    for ``i = 0..5``.
    """
    h, s, v = np.broadcast_arrays(*(np.asarray(c, dtype=np.float64) for c in (h, s, v)))
    h6 = h * 6.0
    i = np.floor(h6)
    f = h6 - i
    i = i.astype(np.int64) % 6
    p = v * (1.0 - s)
    q = v * (1.0 - s * f)
    t = v * (1.0 - s * (1.0 - f))
    choices_r = [v, q, p, p, t, v]
    choices_g = [t, v, v, q, p, p]
    choices_b = [p, p, t, v, v, q]
    r = np.choose(i, choices_r)
    g = np.choose(i, choices_g)
    b = np.choose(i, choices_b)
    return np.stack([r, g, b], axis=-1)


def to_uint8(rgb) -> np.ndarray:
    return np.clip(np.floor(np.asarray(rgb) * 255.0 + 0.5), 0, 255).astype(np.uint8)


@dataclass(frozen=True, eq=False)
class ReactivComposite:
    """HSV channels, rendered RGB and the time index map of a composite."""

    hue: np.ndarray
    saturation: np.ndarray
    value: np.ndarray
    time_index: np.ndarray
    mode: str

    @property
    def rgb(self) -> np.ndarray:
        return to_uint8(hsv_to_rgb(self.hue, self.saturation, self.value))


def compose_reactiv(
    stack: ImageStack,
    mode: str = "max_change",
    tau: float = 0.99,
    looks: float | None = None,
    prescreen: bool = True,
) -> ReactivComposite:
    """Build a change-time composite of a stack.

    Parameters
    ----------
    stack : ImageStack
        Intensity or amplitude stack (converted as needed).
    mode : {"max_value", "start", "max_change", "stop"}
        Time of interest shown by the hue.
    tau : float
        Change probability threshold for ``start`` and ``stop``.
    looks : float, optional
        Looks used for the saturation normalization; the stack ENL by
        default.
    prescreen : bool
        Skip change-time detection (time index 0) where the normalized
        saturation is at most 0.25. Ignored for ``max_value``.
    """
    if mode not in MODES:
        raise ParameterError(f"mode must be one of {MODES}, got {mode!r}")
    m = stack.count
    if m < 2:
        raise InputError("a composite needs at least two dates")
    amplitude = stack.amplitude().images
    intensity = stack.intensity().images
    enl = stack.enl
    looks = enl if looks is None else float(looks)
    saturation = normalize_saturation(coeff_variation_empirical(amplitude), looks, m)
    value = value_channel(amplitude)

    if mode == "max_value":
        time_index = np.argmax(amplitude, axis=0) + 1
    else:
        if mode == "start":
            time_index = detect_time_start(intensity, enl, tau)
        elif mode == "stop":
            time_index = detect_time_stop(intensity, enl, tau)
        else:
            time_index = detect_time_max(intensity, enl)
        time_index = np.asarray(time_index)
        if prescreen:
            time_index = np.where(saturation > 0.25, time_index, 0)
        saturation = np.where(time_index > 0, saturation, 0.0)
    time_index = np.asarray(time_index, dtype=np.int32)

    ts = stack.timestamps
    when = ts[np.clip(time_index - 1, 0, m - 1)]
    hue = np.where(time_index > 0, hue_from_time(when, ts[0], ts[-1]), 0.0)
    return ReactivComposite(hue=hue, saturation=saturation, value=value, time_index=time_index, mode=mode)


def colorbar(width: int = 256, height: int = 16) -> np.ndarray:
    """RGB legend of the hue ramp from the first to the last date."""
    hue = np.linspace(0.0, HUE_SPAN, width)
    rgb = to_uint8(hsv_to_rgb(hue, 1.0, 1.0))
    return np.broadcast_to(rgb[np.newaxis], (height, width, 3)).copy()
