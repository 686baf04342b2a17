"""Simplified generalized likelihood ratio (GLR) change statistics.

For two denoised reflectivities ``a`` and ``b`` with a common ENL ``L``::

    s_glr(a, b, L) = 2 L log( sqrt(a/b) + sqrt(b/a) ) - 2 L log 2
                   = 2 L log cosh( log(b/a) / 2 )

The second form is what is evaluated. Under the no-change hypothesis
``2 rho s_glr`` is approximately chi-square with one degree of freedom,
with a second-order correction involving five degrees of freedom
(:func:`change_probability`).

Pixels equal to zero make the ratio diverge; they map to ``+inf`` which
callers treat as a saturated dissimilarity (see :func:`saturated`).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError, DomainError, ParameterError
from .special import chi2_cdf
from .stack import ImageStack

__all__ = [
    "s_glr",
    "s_glr_general",
    "change_sign",
    "change_probability",
    "threshold_from_probability",
    "threshold_map",
    "saturated",
    "weighted_sglr_mean",
    "weighted_sglr_distance",
    "PairResult",
    "pair_detect",
    "MonitorStep",
    "cumulative_monitor",
    "WEIGHTS",
]

_LOG2 = math.log(2.0)


def _as_array(x):
    return np.asarray(x, dtype=np.float64)


def _finish(arr):
    return float(arr) if arr.ndim == 0 else arr


def _check_enl(enl):
    enl_arr = _as_array(enl)
    if np.any(~(enl_arr > 0)) or not np.all(np.isfinite(enl_arr)):
        raise ParameterError(f"enl must be positive and finite, got {enl}")
    return enl_arr


def _log_cosh(z):
    # z >= 0. log1p(2 sinh(z/2)^2) keeps full relative precision near 0.
    small = z < 1.0
    out = np.empty_like(z)
    zs = z[small]
    out[small] = np.log1p(2.0 * np.sinh(0.5 * zs) ** 2)
    zl = z[~small]
    out[~small] = zl + np.log1p(np.exp(-2.0 * zl)) - _LOG2
    return out


def s_glr(u_t, u_t2, enl):
    """Simplified GLR dissimilarity of two reflectivities with equal ENL.

    Symmetric in its first two arguments, invariant to a common scaling,
    linear in ``enl`` and zero exactly when ``u_t == u_t2``. Zero-valued
    pixels give ``+inf``.

    Parameters
    ----------
    u_t, u_t2 : array_like
        Nonnegative reflectivities (broadcast against each other).
    enl : float or array_like
        Equivalent number of looks, > 0.
    """
    a = _as_array(u_t)
    b = _as_array(u_t2)
    enl_arr = _check_enl(enl)
    if np.any(a < 0) or np.any(b < 0) or np.isnan(a).any() or np.isnan(b).any():
        raise DomainError("reflectivities must be >= 0")
    lo, hi = np.broadcast_arrays(np.minimum(a, b), np.maximum(a, b))
    lo = np.atleast_1d(lo)
    hi = np.atleast_1d(hi)
    zero = lo == 0
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        half_log_ratio = 0.5 * np.log1p((hi - lo) / np.where(zero, 1.0, lo))
    half_log_ratio[zero] = 0.0
    value = 2.0 * _log_cosh(half_log_ratio)
    value[zero] = np.inf
    value = value.reshape(np.broadcast(a, b).shape) * enl_arr
    return _finish(np.asarray(value))


def _series_jensen_gap(x, q, terms=24):
    # log1p(q x) - q log1p(x) = sum_{n>=2} (-1)^(n+1) (q^n - q) x^n / n
    total = np.zeros_like(x)
    xn = x * x
    qn = q * q
    for n in range(2, terms + 2):
        sign = 1.0 if n % 2 else -1.0
        total = total + sign * (qn - q) * xn / n
        xn = xn * x
        qn = qn * q
    return total


def s_glr_general(u_t, u_t2, looks_t, looks_t2):
    """GLR dissimilarity of two reflectivities with their own ENLs.

    Evaluates ``L1 log(m/a) + L2 log(m/b)`` with ``m`` the look-weighted
    mean, written as ``(L1 + L2) (log1p(q x) - q log1p(x))`` where
    ``x = b/a - 1 >= 0`` (``a`` the smaller value) and ``q`` the look
    fraction of ``b``. A power series is used for ``x < 0.1`` to avoid
    cancellation. Reduces to :func:`s_glr` when the
    looks are equal.
    """
    a = _as_array(u_t)
    b = _as_array(u_t2)
    la = _as_array(looks_t)
    lb = _as_array(looks_t2)
    for name, arr in (("u_t", a), ("u_t2", b), ("looks_t", la), ("looks_t2", lb)):
        if np.any(~(arr > 0)) or not np.all(np.isfinite(arr)):
            raise DomainError(f"{name} must be positive and finite")
    a, b, la, lb = (np.atleast_1d(v) for v in np.broadcast_arrays(a, b, la, lb))
    # the GLR is symmetric under swapping (u, L) pairs; take the smaller
    # reflectivity as reference so that x >= 0
    swap = b < a
    a, b = np.where(swap, b, a), np.where(swap, a, b)
    la, lb = np.where(swap, lb, la), np.where(swap, la, lb)
    total_looks = la + lb
    q = lb / total_looks
    x = (b - a) / a
    small = np.abs(x) < 0.1
    gap = np.empty_like(x)
    gap[small] = _series_jensen_gap(x[small], q[small])
    big = ~small
    gap[big] = np.log1p(q[big] * x[big]) - q[big] * np.log1p(x[big])
    value = np.maximum(total_looks * gap, 0.0)
    shape = np.broadcast(*(_as_array(v) for v in (u_t, u_t2, looks_t, looks_t2))).shape
    return _finish(value.reshape(shape))


def change_sign(u_t, u_t2):
    """Sign of ``log sqrt(u_t2 / u_t)``: +1 for an increase relative to ``u_t``."""
    a = _as_array(u_t)
    b = _as_array(u_t2)
    if np.any(a < 0) or np.any(b < 0):
        raise DomainError("reflectivities must be >= 0")
    sign = np.sign(b - a).astype(np.int8)
    return int(sign) if sign.ndim == 0 else sign


def _bartlett(enl):
    rho = 1.0 - 1.0 / (4.0 * enl)
    omega2 = -0.25 * (1.0 - 1.0 / rho) ** 2
    return rho, omega2


def change_probability(s, enl):
    """Chi-square calibrated change probability of a GLR value.

    With ``rho = 1 - 1/(4 L)``, ``omega2 = -(1 - 1/rho)**2 / 4`` and
    ``delta = 2 rho s``, returns
    ``F1(delta) + omega2 * (F5(delta) - F1(delta))`` clipped to [0, 1],
    where ``Fk`` is the chi-square CDF with ``k`` degrees of freedom.
    """
    enl_arr = _as_array(enl)
    if np.any(~(enl_arr > 0.25)):
        raise ParameterError(f"enl must exceed 1/4 for a positive rho, got {enl}")
    s_arr = _as_array(s)
    if np.any(s_arr < 0):
        raise DomainError("GLR values must be >= 0")
    rho, omega2 = _bartlett(enl_arr)
    delta = 2.0 * rho * s_arr
    if enl_arr.ndim == 0:
        f1 = chi2_cdf(delta, 1)
        f5 = chi2_cdf(delta, 5)
    else:
        delta_b, _ = np.broadcast_arrays(delta, enl_arr)
        f1 = chi2_cdf(delta_b, 1)
        f5 = chi2_cdf(delta_b, 5)
    p = np.clip(f1 + omega2 * (f5 - f1), 0.0, 1.0)
    return _finish(np.asarray(p))


def threshold_from_probability(tau: float, enl: float, tol: float = 1e-8, max_iter: int = 200) -> float:
    """GLR threshold ``s`` with ``change_probability(s, enl) == tau``.

    Solved by bisection; the probability is nondecreasing in ``s``.
    """
    tau = float(tau)
    if not 0.0 < tau < 1.0:
        raise ParameterError(f"tau must lie in (0, 1), got {tau}")
    enl = float(enl)
    lo, hi = 0.0, 1.0
    while change_probability(hi, enl) < tau:
        lo, hi = hi, 2.0 * hi
        if hi > 1e6:
            raise ConvergenceError(f"no threshold below 1e6 reaches probability {tau}")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        p = change_probability(mid, enl)
        if abs(p - tau) < tol and hi - lo < 1e-12 * max(1.0, mid):
            return mid
        if p < tau:
            lo = mid
        else:
            hi = mid
    mid = 0.5 * (lo + hi)
    if abs(change_probability(mid, enl) - tau) < tol:
        return mid
    raise ConvergenceError(f"threshold bisection did not converge for tau={tau}, enl={enl}")


def threshold_map(similarity, threshold: float) -> np.ndarray:
    """Binary change mask ``similarity >= threshold``."""
    if not threshold >= 0:
        raise ParameterError(f"threshold must be >= 0, got {threshold}")
    return np.asarray(similarity) >= threshold


def saturated(values) -> np.ndarray:
    """Mask of saturated (non-finite) dissimilarities."""
    return ~np.isfinite(np.asarray(values))


def weighted_sglr_mean(u_t, u_t2, enl):
    """GLR weighted by ``exp((sqrt(u_t) + sqrt(u_t2)) / 2)``.

    Bright targets get larger values; overflow saturates to ``+inf``.
    """
    a = _as_array(u_t)
    b = _as_array(u_t2)
    s = s_glr(a, b, enl)
    with np.errstate(over="ignore", invalid="ignore"):
        weight = np.exp(0.5 * (np.sqrt(a) + np.sqrt(b)))
        value = np.asarray(weight * s)
    value = np.where(np.isfinite(value) | np.isnan(value), value, np.inf)
    # exp overflow times a zero GLR is nan: the pair is unchanged.
    value = np.where(np.isnan(value), np.where(np.asarray(s) == 0, 0.0, np.inf), value)
    return _finish(np.asarray(value))


def weighted_sglr_distance(u_t, u_t2, enl):
    """GLR weighted by the log amplitude distance ``log|sqrt(u_t) - sqrt(u_t2)|``.

    The weight is negative when the amplitudes differ by less than one.
    Equal inputs give 0 by convention; zero-valued inputs give ``+inf``.
    """
    a = _as_array(u_t)
    b = _as_array(u_t2)
    s = np.asarray(s_glr(a, b, enl))
    dist = np.abs(np.sqrt(a) - np.sqrt(b))
    with np.errstate(divide="ignore", invalid="ignore"):
        value = np.log(dist) * s
    value = np.where(dist == 0, 0.0, value)
    value = np.where(np.isinf(s), np.inf, value)
    return _finish(np.asarray(value))


WEIGHTS = {
    "none": s_glr,
    "mean": weighted_sglr_mean,
    "distance": weighted_sglr_distance,
}


@dataclass(frozen=True, eq=False)
class PairResult:
    """Outputs of :func:`pair_detect` for one image pair."""

    t: int
    t2: int
    similarity: np.ndarray
    probability: np.ndarray
    mask: np.ndarray
    sign: np.ndarray
    magnitude: np.ndarray
    saturated: np.ndarray
    threshold: float
    weights: str = "none"


def pair_detect(
    stack: ImageStack,
    t: int,
    t2: int,
    tau: float = 0.99,
    weights: str = "none",
    weight_threshold: float | None = None,
    alpha1: float = -2.0,
    alpha2: float = 2.0,
) -> PairResult:
    """Change detection between dates ``t`` (reference) and ``t2``.

    The mask uses the GLR threshold matching change probability ``tau``.
    With ``weights`` set to ``"mean"`` or ``"distance"`` the similarity map
    holds the weighted statistic, which has no calibrated distribution, so
    ``weight_threshold`` must be given explicitly.
    """
    from .magnitude import signed_magnitude

    if weights not in WEIGHTS:
        raise ParameterError(f"weights must be one of {sorted(WEIGHTS)}, got {weights!r}")
    t = stack.check_index(t)
    t2 = stack.check_index(t2)
    intensity = stack.intensity()
    a = intensity.image(t)
    b = intensity.image(t2)
    enl = intensity.enl
    s = s_glr(a, b, enl)
    probability = change_probability(s, enl)
    sign = change_sign(a, b)
    if weights == "none":
        similarity = s
        threshold = threshold_from_probability(tau, enl)
    else:
        if weight_threshold is None:
            raise ParameterError("weighted statistics need an explicit weight_threshold")
        similarity = WEIGHTS[weights](a, b, enl)
        threshold = float(weight_threshold)
    # weighted statistics may be negative, so their threshold is unrestricted
    mask = threshold_map(similarity, threshold) if weights == "none" else np.asarray(similarity) >= threshold
    return PairResult(
        t=t,
        t2=t2,
        similarity=similarity,
        probability=probability,
        mask=mask,
        sign=sign,
        magnitude=signed_magnitude(s, sign, alpha1, alpha2),
        saturated=saturated(s),
        threshold=threshold,
        weights=weights,
    )


@dataclass(frozen=True, eq=False)
class MonitorStep:
    """One date of a cumulative monitoring run."""

    t: int
    result: PairResult
    signed_mask: np.ndarray
    ratio: np.ndarray


def cumulative_monitor(stack: ImageStack, reference: int, tau: float = 0.99, **kwargs) -> list[MonitorStep]:
    """Compare every date against a fixed reference date.

    Each step carries the signed change mask (``sign * mask``) and the
    display background ``reference / image`` (zero where the image is 0).
    """
    reference = stack.check_index(reference)
    ref = stack.intensity().image(reference)
    steps = []
    for t in range(1, stack.count + 1):
        if t == reference:
            continue
        result = pair_detect(stack, reference, t, tau, **kwargs)
        other = stack.intensity().image(t)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(other > 0, ref / np.where(other > 0, other, 1.0), 0.0)
        signed = (result.sign * result.mask).astype(np.int8)
        steps.append(MonitorStep(t=t, result=result, signed_mask=signed, ratio=ratio))
    return steps
