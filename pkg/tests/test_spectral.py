import itertools

import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from sarchange.errors import InputError
from sarchange.spectral import LabelSeries, eigen_sym, eigengap_k, kmeans, normalized_laplacian, spectral_labels


def test_laplacian_examples():
    np.testing.assert_array_equal(normalized_laplacian(np.eye(3)), np.zeros((3, 3)))
    np.testing.assert_allclose(normalized_laplacian(np.ones((2, 2))), [[0.5, -0.5], [-0.5, 0.5]])


def test_laplacian_kernel():
    a = np.array([[1, 1, 0, 1], [1, 1, 1, 0], [0, 1, 1, 1], [1, 0, 1, 1]], float)
    v = np.sqrt(a.sum(axis=1))
    np.testing.assert_allclose(normalized_laplacian(a) @ v, 0.0, atol=1e-14)


def test_eigen_examples():
    w, v = eigen_sym(np.diag([3.0, 1.0, 2.0]))
    np.testing.assert_allclose(w, [1.0, 2.0, 3.0])
    w, _ = eigen_sym([[0.5, -0.5], [-0.5, 0.5]])
    np.testing.assert_allclose(w, [0.0, 1.0], atol=1e-15)
    with pytest.raises(InputError):
        eigen_sym([[1.0, 2.0], [0.0, 1.0]])


@given(arrays(np.float64, (6, 6), elements=st.floats(-10, 10)))
@settings(max_examples=200, deadline=None)
def test_eigen_reconstruction(x):
    a = x + x.T
    w, v = eigen_sym(a)
    assert np.all(np.diff(w) >= 0)
    np.testing.assert_allclose(v @ np.diag(w) @ v.T, a, atol=1e-9)
    np.testing.assert_allclose(v.T @ v, np.eye(6), atol=1e-10)
    np.testing.assert_allclose(w, np.linalg.eigvalsh(a), atol=1e-9)


def test_eigen_batch_matches_single():
    rng = np.random.default_rng(2)
    x = rng.normal(size=(50, 5, 5))
    a = x + np.swapaxes(x, 1, 2)
    w, _ = eigen_sym(a)
    for i in (0, 17, 49):
        np.testing.assert_allclose(w[i], eigen_sym(a[i])[0], atol=1e-12)


def test_eigengap_examples():
    assert eigengap_k([0.0, 0.01, 0.9, 1.1]) == 2
    assert eigengap_k([0.7, 0.7, 0.7]) == 1
    assert eigengap_k([0.0, 1.0]) == 1


def test_kmeans_separates_blobs():
    rng = np.random.default_rng(0)
    pts = np.concatenate([rng.normal(0, 0.1, (20, 2)), rng.normal(5, 0.1, (20, 2))])
    labels, inertia = kmeans(pts, 2, seed=1)
    assert len(set(labels[:20])) == 1 and len(set(labels[20:])) == 1 and labels[0] != labels[-1]
    again, _ = kmeans(pts, 2, seed=1)
    np.testing.assert_array_equal(labels, again)


def test_spectral_examples():
    blocks = np.kron(np.eye(2), np.ones((3, 3)))
    res = spectral_labels(blocks)
    assert res.labels == (1, 1, 1, 2, 2, 2) and res.k == 2
    res = spectral_labels(np.ones((4, 4)))
    assert res.labels == (1, 1, 1, 1) and res.k == 1
    # isolated dates form their own clusters (k = M)
    res = spectral_labels(np.eye(3))
    assert res.labels == (1, 2, 3) and res.k == 3


def test_label_series_validation():
    with pytest.raises(InputError):
        LabelSeries((1, 3), 2)
    assert LabelSeries((1, 2, 1), 2).labels == (1, 2, 1)


def _affinities(m):
    pairs = list(itertools.combinations(range(m), 2))
    for bits in itertools.product((0, 1), repeat=len(pairs)):
        a = np.eye(m, dtype=np.uint8)
        for (i, j), bit in zip(pairs, bits):
            a[i, j] = a[j, i] = bit
        yield a


def _component_partition(a):
    g = nx.from_numpy_array(a - np.diag(np.diag(a)))
    comp = {node: i for i, c in enumerate(nx.connected_components(g)) for node in c}
    return tuple(comp[i] for i in range(a.shape[0])), nx.number_connected_components(g)


def _same_partition(x, y):
    return all((x[i] == x[j]) == (y[i] == y[j]) for i in range(len(x)) for j in range(len(x)))


@pytest.mark.parametrize("m", [2, 3, 4, 5])
def test_disconnected_graphs_split_into_components(m):
    for a in _affinities(m):
        part, n = _component_partition(a)
        if n < 2:
            continue
        res = spectral_labels(a)
        assert res.k == n
        assert _same_partition(res.labels, part), (a, res)
