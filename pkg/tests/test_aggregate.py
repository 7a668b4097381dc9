import numpy as np
import pytest

from dagdiffuse.aggregate import (
    CorrespondenceMap,
    aggregate_pixels_to_vertices,
    label_map_correspondence,
    project_vertices_to_pixels,
)
from dagdiffuse.errors import VertexOutOfRange


def test_mean_of_two_pixels():
    img = np.array([[1.0, 3.0]])
    corr = CorrespondenceMap.from_pairs([(0, 0, 0, 0), (0, 0, 1, 0)])
    f, cov = aggregate_pixels_to_vertices(img, corr, 1)
    assert f[0, 0] == 2.0 and cov[0]


def test_mean_across_images():
    imgs = [np.array([[2.0]]), np.array([[4.0]])]
    corr = CorrespondenceMap.from_pairs([(0, 0, 0, 0), (1, 0, 0, 0)])
    f, _ = aggregate_pixels_to_vertices(imgs, corr, 1)
    assert f[0, 0] == 3.0


def test_uncovered_vertex():
    corr = CorrespondenceMap.from_pairs([(0, 0, 0, 0)])
    f, cov = aggregate_pixels_to_vertices(np.ones((2, 2, 3)), corr, 2)
    assert f[1].tolist() == [0.0, 0.0, 0.0]
    assert cov.tolist() == [True, False]


def test_project_copy():
    corr = CorrespondenceMap.from_pairs([(0, 0, 0, 0), (0, 0, 1, 0), (0, 1, 1, 0)])
    out, cov = project_vertices_to_pixels(np.array([5.0]), corr, (2, 2))
    assert out[..., 0].tolist() == [[5, 5], [0, 5]]
    assert cov.tolist() == [[True, True], [False, True]]


def test_project_empty():
    corr = CorrespondenceMap.from_pairs([])
    out, cov = project_vertices_to_pixels(np.zeros((3, 2)), corr, (4, 5))
    assert out.shape == (4, 5, 2) and not out.any() and not cov.any()


def test_round_trip_fixed_point(rng):
    labels = rng.integers(0, 7, size=(9, 11))
    labels = np.unique(labels, return_inverse=True)[1].reshape(labels.shape)
    corr = label_map_correspondence(labels)
    values = rng.normal(size=(labels.max() + 1, 3))
    pix = values[labels]
    f, cov = aggregate_pixels_to_vertices(pix, corr, len(values))
    back, mask = project_vertices_to_pixels(f, corr, labels.shape)
    assert cov.all() and mask.all()
    assert np.array_equal(back, pix)


def test_permutation_invariance(rng):
    img = rng.normal(size=(6, 6, 2))
    rows = [(0, r, c, int(rng.integers(0, 5))) for r in range(6) for c in range(6)]
    a, _ = aggregate_pixels_to_vertices(img, CorrespondenceMap.from_pairs(rows), 5)
    shuffled = [rows[i] for i in rng.permutation(len(rows))]
    b, _ = aggregate_pixels_to_vertices(img, CorrespondenceMap.from_pairs(shuffled), 5)
    assert np.array_equal(a, b)


def test_errors():
    corr = CorrespondenceMap.from_pairs([(0, 0, 0, 3)])
    with pytest.raises(VertexOutOfRange):
        aggregate_pixels_to_vertices(np.ones((1, 1)), corr, 2)
    with pytest.raises(VertexOutOfRange):
        project_vertices_to_pixels(np.ones(2), corr, (1, 1))
    with pytest.raises(ValueError):
        CorrespondenceMap.from_pairs([(0, 0, 0, 0), (0, 0, 0, 1)])
