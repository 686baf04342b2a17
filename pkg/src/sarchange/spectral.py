"""Spectral clustering of small affinity matrices.

Matrices here are per-pixel and tiny (M dates), so the eigensolver is a
cyclic Jacobi iteration vectorized over a batch of matrices rather than a
LAPACK call per pixel.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError, InputError

__all__ = [
    "LabelSeries",
    "normalized_laplacian",
    "eigen_sym",
    "eigengap_k",
    "kmeans",
    "spectral_labels",
    "spectral_labels_batch",
    "ZERO_EIGENVALUE",
]

ZERO_EIGENVALUE = 1e-9


@dataclass(frozen=True)
class LabelSeries:
    """Cluster labels ``1..k`` of the dates of one pixel, numbered by first appearance."""

    labels: tuple
    k: int
    zero_rows: bool = False

    def __post_init__(self):
        labels = tuple(int(v) for v in self.labels)
        if not labels:
            raise InputError("empty label series")
        if sorted(set(labels)) != list(range(1, self.k + 1)):
            raise InputError(f"labels {labels} do not use exactly 1..{self.k}")
        object.__setattr__(self, "labels", labels)


def normalized_laplacian(affinity) -> np.ndarray:
    """``D^-1/2 (D - A) D^-1/2`` for one or a batch of affinity matrices."""
    a = np.asarray(affinity, dtype=np.float64)
    degree = a.sum(axis=-1)
    if np.any(degree <= 0):
        raise InputError("every node needs a positive degree")
    inv_sqrt = 1.0 / np.sqrt(degree)
    lap = -a
    idx = np.arange(a.shape[-1])
    lap[..., idx, idx] += degree
    return lap * inv_sqrt[..., :, np.newaxis] * inv_sqrt[..., np.newaxis, :]


def eigen_sym(matrix, tol: float = 1e-12, max_sweeps: int = 100):
    """Eigen-decomposition of symmetric matrices by cyclic Jacobi rotations.

    Parameters
    ----------
    matrix : array_like, shape (..., M, M)
        Symmetric matrices (a leading batch axis is allowed).
    tol : float
        Sweeps stop once the off-diagonal Frobenius norm of every matrix is
        below ``tol * max(1, ||A||_F)``.

    Returns
    -------
    eigenvalues : ndarray, shape (..., M)
        Ascending.
    eigenvectors : ndarray, shape (..., M, M)
        Orthonormal columns, ``A = V diag(w) V^T``.
    """
    a = np.array(matrix, dtype=np.float64)
    if a.ndim < 2 or a.shape[-1] != a.shape[-2]:
        raise InputError(f"expected square matrices, got shape {a.shape}")
    scale = np.sqrt(np.sum(a * a, axis=(-2, -1)))
    asym = np.abs(a - np.swapaxes(a, -1, -2)).max(axis=(-2, -1)) if a.size else 0.0
    if np.any(asym > 1e-12 * np.maximum(1.0, scale)):
        raise InputError("eigen_sym requires a symmetric matrix")
    batch_shape = a.shape[:-2]
    n = a.shape[-1]
    a = a.reshape((-1, n, n))
    a = 0.5 * (a + np.swapaxes(a, -1, -2))
    v = np.broadcast_to(np.eye(n), a.shape).copy()
    limit = tol * np.maximum(1.0, scale.reshape(-1))
    off_mask = ~np.eye(n, dtype=bool)
    for _ in range(max_sweeps):
        off = np.sqrt(np.sum(a[:, off_mask] ** 2, axis=-1))
        active = off >= limit
        if not active.any():
            break
        sub = np.flatnonzero(active)
        aa = a[sub]
        vv = v[sub]
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = aa[:, p, q]
                rotate = apq != 0.0
                if not rotate.any():
                    continue
                with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
                    theta = (aa[:, q, q] - aa[:, p, p]) / (2.0 * apq)
                    t = np.where(theta >= 0, 1.0, -1.0) / (np.abs(theta) + np.hypot(theta, 1.0))
                t = np.where(rotate & np.isfinite(theta), t, 0.0)
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                # A <- J^T A J with J = [[c, s], [-s, c]] in the (p, q) plane
                col_p = aa[:, :, p].copy()
                col_q = aa[:, :, q]
                aa[:, :, p] = c[:, None] * col_p - s[:, None] * col_q
                aa[:, :, q] = s[:, None] * col_p + c[:, None] * col_q
                row_p = aa[:, p, :].copy()
                row_q = aa[:, q, :]
                aa[:, p, :] = c[:, None] * row_p - s[:, None] * row_q
                aa[:, q, :] = s[:, None] * row_p + c[:, None] * row_q
                vp = vv[:, :, p].copy()
                vq = vv[:, :, q]
                vv[:, :, p] = c[:, None] * vp - s[:, None] * vq
                vv[:, :, q] = s[:, None] * vp + c[:, None] * vq
        a[sub] = aa
        v[sub] = vv
    else:
        off = np.sqrt(np.sum(a[:, off_mask] ** 2, axis=-1))
        if np.any(off >= limit):
            raise ConvergenceError(f"Jacobi iteration did not converge in {max_sweeps} sweeps")
    w = np.diagonal(a, axis1=-2, axis2=-1).copy()
    order = np.argsort(w, axis=-1, kind="stable")
    w = np.take_along_axis(w, order, axis=-1)
    v = np.take_along_axis(v, order[:, np.newaxis, :], axis=-1)
    return w.reshape(batch_shape + (n,)), v.reshape(batch_shape + (n, n))


def eigengap_k(eigenvalues) -> int | np.ndarray:
    """Cluster count at the largest gap ``w[t] - w[t-1]`` (1-based ``t``).

    Ties go to the smallest ``t``; the last axis holds ascending eigenvalues.
    """
    w = np.asarray(eigenvalues, dtype=np.float64)
    if w.shape[-1] < 2:
        raise InputError("eigengap needs at least two eigenvalues")
    k = np.argmax(np.diff(w, axis=-1), axis=-1) + 1
    return int(k) if np.ndim(k) == 0 else k


def _kmeans_once(points, k, rng, max_iter):
    n = points.shape[0]
    centers = np.empty((k, points.shape[1]))
    centers[0] = points[rng.integers(n)]
    d2 = np.sum((points - centers[0]) ** 2, axis=1)
    for j in range(1, k):
        total = d2.sum()
        if total > 0:
            idx = rng.choice(n, p=d2 / total)
        else:
            idx = rng.integers(n)
        centers[j] = points[idx]
        d2 = np.minimum(d2, np.sum((points - centers[j]) ** 2, axis=1))
    labels = None
    for _ in range(max_iter):
        dist = np.sum((points[:, None, :] - centers[None, :, :]) ** 2, axis=2)
        new_labels = np.argmin(dist, axis=1)
        if labels is not None and np.array_equal(new_labels, labels):
            break
        labels = new_labels
        for j in range(k):
            members = labels == j
            if members.any():
                centers[j] = points[members].mean(axis=0)
    dist = np.sum((points[:, None, :] - centers[None, :, :]) ** 2, axis=2)
    labels = np.argmin(dist, axis=1)
    inertia = float(dist[np.arange(n), labels].sum())
    return labels, inertia


def kmeans(points, k: int, seed=0, restarts: int = 50, max_iter: int = 100):
    """Lloyd's k-means with k-means++ seeding; best of ``restarts`` runs.

    Returns 0-based labels and the within-cluster sum of squares.
    """
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2 or not 1 <= k <= points.shape[0]:
        raise InputError(f"cannot form {k} clusters from {points.shape[0]} points")
    rng = np.random.default_rng(seed)
    best_labels, best_inertia = None, np.inf
    for _ in range(restarts):
        labels, inertia = _kmeans_once(points, k, rng, max_iter)
        if inertia < best_inertia - 1e-12:
            best_labels, best_inertia = labels, inertia
    return best_labels, best_inertia


def _first_appearance(labels) -> tuple:
    mapping = {}
    out = []
    for lab in labels:
        if lab not in mapping:
            mapping[lab] = len(mapping) + 1
        out.append(mapping[lab])
    return tuple(out)


def _labels_from_spectrum(w, v, seed) -> LabelSeries:
    m = w.shape[0]
    zeros = int(np.sum(w < ZERO_EIGENVALUE))
    # a disconnected graph: its components are the exact spectral clusters
    k = zeros if zeros >= 2 else eigengap_k(w)
    if k == 1:
        return LabelSeries((1,) * m, 1)
    if k >= m:
        return LabelSeries(tuple(range(1, m + 1)), m)
    u = v[:, :k].copy()
    norms = np.linalg.norm(u, axis=1)
    zero_rows = bool(np.any(norms < 1e-12))
    u[norms >= 1e-12] /= norms[norms >= 1e-12, None]
    labels, _ = kmeans(u, k, seed=seed)
    labels = _first_appearance(labels.tolist())
    return LabelSeries(labels, max(labels), zero_rows)


def spectral_labels(affinity, seed=0) -> LabelSeries:
    """Cluster the dates of one pixel from its binary affinity matrix.

    The cluster count is the number of zero Laplacian eigenvalues when
    the affinity graph is disconnected and the eigengap heuristic
    otherwise. Rows of the ``k`` eigenvectors with the smallest
    eigenvalues are normalized to unit length and clustered with k-means.
    """
    a = np.asarray(affinity, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 2:
        raise InputError(f"affinity must be an M x M matrix with M >= 2, got {a.shape}")
    w, v = eigen_sym(normalized_laplacian(a))
    return _labels_from_spectrum(w, v, seed)


def spectral_labels_batch(affinities, seed=0) -> list[LabelSeries]:
    """:func:`spectral_labels` for a batch of affinities, one eigensolve call."""
    a = np.asarray(affinities, dtype=np.float64)
    if a.shape[0] == 0:
        return []
    w, v = eigen_sym(normalized_laplacian(a))
    return [_labels_from_spectrum(w[i], v[i], seed) for i in range(a.shape[0])]
