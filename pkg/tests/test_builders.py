import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dagdiffuse.builders import (
    GridSpec,
    NeighborMode,
    PointCloud,
    build_grid_dags,
    build_pointcloud_dags,
    build_superpixel_dags,
    default_radius,
    estimate_normals,
    knn_search,
    neighbor_sets,
    superpixel_adjacency,
    symmetric_pairs,
    tangent_select,
)
from dagdiffuse.checks import cross_plane_edges, parallel_planes
from dagdiffuse.errors import DegenerateNeighborhood, MissingNormals
from dagdiffuse.graph import check_bidirectional_symmetry, validate_acyclic


def edge_set(dag):
    return set(map(tuple, dag.edges.tolist()))


def assert_valid(dagset):
    for dag, _ in dagset:
        validate_acyclic(dag)
    assert check_bidirectional_symmetry(dagset) == []


# -- grids ---------------------------------------------------------------------

def test_grid_predecessors_3x3():
    spec = GridSpec(3, 3)
    l2r = build_grid_dags(spec).dags[0]
    preds = l2r.predecessors(spec.vertex(1, 1)).tolist()
    assert preds == [spec.vertex(0, 0), spec.vertex(1, 0), spec.vertex(2, 0)]


def test_grid_first_column_has_no_predecessors():
    spec = GridSpec(4, 6)
    l2r = build_grid_dags(spec).dags[0]
    for r in range(4):
        assert l2r.predecessors(spec.vertex(r, 0)).size == 0


def test_grid_single_row_chain():
    dagset = build_grid_dags(GridSpec(1, 5))
    l2r, sched = dagset.dags[0], dagset.schedules[0]
    assert edge_set(l2r) == {(0, 1), (1, 2), (2, 3), (3, 4)}
    assert sched.sizes == [1] * 5


@pytest.mark.parametrize("h,w", [(1, 1), (2, 3), (5, 4), (7, 7)])
def test_grid_brute_force(h, w):
    spec = GridSpec(h, w)
    dagset = build_grid_dags(spec)
    want = {k: set() for k in range(4)}
    for r in range(h):
        for c in range(w):
            for d in (-1, 0, 1):
                if 0 <= r + d < h and c >= 1:
                    want[0].add((spec.vertex(r + d, c - 1), spec.vertex(r, c)))
                if 0 <= c + d < w and r >= 1:
                    want[2].add((spec.vertex(r - 1, c + d), spec.vertex(r, c)))
    want[1] = {(b, a) for a, b in want[0]}
    want[3] = {(b, a) for a, b in want[2]}
    for k in range(4):
        assert edge_set(dagset.dags[k]) == want[k]
    assert_valid(dagset)
    assert dagset.schedules[0].sizes == [h] * w
    assert dagset.schedules[2].sizes == [w] * h


# -- superpixels ---------------------------------------------------------------

def test_superpixels_horizontal():
    dagset, cent = build_superpixel_dags(np.array([[0, 1], [0, 1]]))
    assert edge_set(dagset.dags[0]) == {(0, 1)}
    assert edge_set(dagset.dags[1]) == {(1, 0)}
    assert dagset.dags[2].num_edges == dagset.dags[3].num_edges == 0
    assert np.allclose(cent, [[0.5, 0.0], [0.5, 1.0]])


def test_superpixels_vertical():
    dagset, _ = build_superpixel_dags(np.array([[0, 0], [1, 1]]))
    assert edge_set(dagset.dags[2]) == {(0, 1)}
    assert dagset.dags[0].num_edges == 0


def test_superpixels_single_label():
    dagset, _ = build_superpixel_dags(np.zeros((3, 4), dtype=int))
    assert dagset.num_vertices == 1
    assert all(d.num_edges == 0 for d in dagset.dags)


def test_superpixels_coincident_centroids_jittered():
    # ring around a centre block: both have centroid (2, 2)
    labels = np.zeros((5, 5), dtype=int)
    labels[1:4, 1:4] = 1
    for seed in range(5):
        dagset, cent = build_superpixel_dags(labels, jitter_seed=seed)
        assert_valid(dagset)
        pairs = dagset.undirected_pairs()
        assert pairs.tolist() == [[0, 1]]
        assert np.linalg.norm(cent[0] - cent[1]) < 0.5
        assert not np.array_equal(cent[0], cent[1])


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 10), st.integers(1, 10), st.integers(1, 8))
def test_superpixels_random_maps(seed, h, w, s):
    rng = np.random.default_rng(seed)
    raw = rng.integers(0, s, size=(h, w))
    labels = np.unique(raw, return_inverse=True)[1].reshape(h, w)
    dagset, _ = build_superpixel_dags(labels, jitter_seed=seed % 7)
    assert_valid(dagset)
    # membership equals 4-connected adjacency regardless of jitter
    assert np.array_equal(dagset.undirected_pairs(), superpixel_adjacency(labels))


# -- point clouds --------------------------------------------------------------

def brute_knn(p, q, r):
    d = np.sqrt(np.sum((p - p[q]) ** 2, axis=1))
    ids = [j for j in range(len(p)) if j != q and d[j] < r]
    return sorted(ids, key=lambda j: (d[j], j)), d


def test_knn_collinear():
    cloud = PointCloud(np.array([[0, 0, 0], [1, 0, 0], [2, 0, 0], [10, 0, 0]], dtype=float))
    ids, dist = knn_search(cloud, 0, NeighborMode(radius=5.0))
    assert ids.tolist() == [1, 2]
    assert dist.tolist() == [1.0, 2.0]


def test_knn_empty():
    cloud = PointCloud(np.array([[0, 0, 0], [1, 0, 0]], dtype=float))
    ids, _ = knn_search(cloud, 0, NeighborMode(radius=0.5))
    assert ids.size == 0


def test_knn_matches_brute_force(rng):
    p = rng.uniform(size=(100, 3))
    cloud = PointCloud(p)
    mode = NeighborMode(radius=0.3)
    for q in range(100):
        ids, dist = knn_search(cloud, q, mode)
        want, d = brute_knn(p, q, 0.3)
        assert ids.tolist() == want
        assert np.array_equal(dist, d[want])


def test_tangent_select_prefers_plane():
    p = np.array([[0, 0, 0], [0.1, 0, 0], [0, 0, 0.2]], dtype=float)
    cloud = PointCloud(p, np.tile([0.0, 0.0, 1.0], (3, 1)))
    cand = knn_search(cloud, 0, NeighborMode(radius=1.0))
    assert tangent_select(cloud, 0, cand, 1).tolist() == [1]


def test_tangent_select_coplanar_falls_back_to_distance(rng):
    p = np.column_stack([rng.uniform(size=(20, 2)), np.zeros(20)])
    cloud = PointCloud(p, np.tile([0.0, 0.0, 1.0], (20, 1)))
    cand = knn_search(cloud, 0, NeighborMode(radius=2.0))
    assert tangent_select(cloud, 0, cand, 4).tolist() == cand[0][:4].tolist()


def test_tangent_select_needs_normals():
    cloud = PointCloud(np.eye(3))
    with pytest.raises(MissingNormals):
        tangent_select(cloud, 0, knn_search(cloud, 0, NeighborMode(radius=2.0)), 1)


def test_parallel_planes_brute_force(rng):
    cloud, split = parallel_planes(rng)
    p, nrm = cloud.positions, cloud.normals
    mode = NeighborMode("tangent", radius=1.0, k=6)
    sel = neighbor_sets(cloud, mode)
    for q in range(len(p)):
        want, d = brute_knn(p, q, 1.0)
        proj = np.abs((p[q] - p[want]) @ nrm[q])
        want = [want[i] for i in sorted(range(len(want)), key=lambda i: (proj[i], d[want[i]], want[i]))][:6]
        assert sel[q].tolist() == want
        assert all((j < split) == (q < split) for j in want)
    tangent = build_pointcloud_dags(cloud, mode)
    euclid = build_pointcloud_dags(cloud, NeighborMode("euclidean", radius=1.0, k=6))
    assert cross_plane_edges(tangent, split) == 0
    assert cross_plane_edges(euclid, split) >= 1


def test_two_points():
    cloud = PointCloud(np.array([[0, 0, 0], [1, 0, 0]], dtype=float))
    dagset = build_pointcloud_dags(cloud, NeighborMode(k=1, radius=2.0))
    assert tuple(dagset.tags) == ("+x", "-x", "+y", "-y", "+z", "-z")
    assert edge_set(dagset.dags[0]) == {(0, 1)}
    assert edge_set(dagset.dags[1]) == {(1, 0)}
    assert all(d.num_edges == 0 for d in dagset.dags[2:])


def test_line_k2_chains():
    x = np.array([3.0, 0.0, 4.0, 1.0, 2.0])
    cloud = PointCloud(np.column_stack([x, np.zeros(5), np.zeros(5)]))
    dagset = build_pointcloud_dags(cloud, NeighborMode(k=2, radius=10.0))
    assert_valid(dagset)
    for e in dagset.dags[0].edges:
        assert x[e[0]] < x[e[1]]
    assert all(d.num_edges == 0 for d in dagset.dags[2:])


def test_clusters_beyond_radius(rng):
    a = rng.uniform(size=(20, 3))
    b = rng.uniform(size=(20, 3)) + 10.0
    cloud = PointCloud(np.vstack([a, b]))
    pairs = build_pointcloud_dags(cloud, NeighborMode(k=6, radius=2.0)).undirected_pairs()
    assert not np.any((pairs[:, 0] < 20) != (pairs[:, 1] < 20))


def test_coincident_axis_coordinates_jittered():
    # pairs tie exactly on every axis magnitude except where coordinates coincide
    p = np.array([[0, 0, 0], [0, 0, 0], [1, 1, 1]], dtype=float)
    cloud = PointCloud(p)
    dagset = build_pointcloud_dags(cloud, NeighborMode(k=2, radius=5.0))
    assert_valid(dagset)
    assert dagset.undirected_pairs().tolist() == [[0, 1], [0, 2], [1, 2]]


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 200), st.integers(1, 8),
       st.sampled_from(["euclidean", "tangent"]))
def test_union_equals_symmetrized_knn(seed, n, k, kind):
    rng = np.random.default_rng(seed)
    p = rng.uniform(size=(n, 3))
    normals = rng.normal(size=(n, 3))
    normals /= np.linalg.norm(normals, axis=1, keepdims=True)
    cloud = PointCloud(p, normals)
    mode = NeighborMode(kind, None, k)
    dagset = build_pointcloud_dags(cloud, mode, jitter_seed=seed % 5)
    assert_valid(dagset)
    # brute-force symmetrized relation
    r = default_radius(cloud)
    want = set()
    for q in range(n):
        ids, d = brute_knn(p, q, r)
        if kind == "tangent":
            proj = np.abs((p[q] - p[ids]) @ normals[q])
            ids = [ids[i] for i in sorted(range(len(ids)), key=lambda i: (proj[i], d[ids[i]], ids[i]))]
        for j in ids[:k]:
            want.add((min(q, j), max(q, j)))
    got = set(map(tuple, dagset.undirected_pairs().tolist()))
    assert got == want
    assert got == set(map(tuple, symmetric_pairs(neighbor_sets(cloud, mode)).tolist()))


def test_dominant_axis_assignment(rng):
    p = rng.uniform(size=(60, 3))
    dagset = build_pointcloud_dags(PointCloud(p), NeighborMode(k=5))
    for a in range(3):
        for s, d in dagset.dags[2 * a].edges:
            delta = np.abs(p[d] - p[s])
            assert np.argmax(delta) == a
            assert p[d, a] > p[s, a]


# -- normals -------------------------------------------------------------------

def test_normals_plane_z(rng):
    p = np.column_stack([rng.uniform(size=(50, 2)), np.zeros(50)])
    n = estimate_normals(PointCloud(p), k=8)
    assert np.allclose(n, [0, 0, 1], atol=1e-6)


def test_normals_plane_x(rng):
    p = np.column_stack([np.zeros(50), rng.uniform(size=(50, 2))])
    n = estimate_normals(PointCloud(p), k=8)
    assert np.allclose(n, [1, 0, 0], atol=1e-6)


def fibonacci_sphere(n):
    i = np.arange(n) + 0.5
    phi = np.arccos(1 - 2 * i / n)
    theta = np.pi * (1 + 5 ** 0.5) * i
    return np.column_stack([np.cos(theta) * np.sin(phi), np.sin(theta) * np.sin(phi), np.cos(phi)])


def angle_to_radial(n, v):
    cos = np.abs(np.sum(n * v, axis=1))
    return np.degrees(np.arccos(np.clip(cos, -1, 1)))


def test_normals_sphere():
    v = fibonacci_sphere(500)
    n = estimate_normals(PointCloud(v), k=8)
    assert angle_to_radial(n, v).max() <= 5.0
    assert np.all(n[:, 2] >= -1e-9)


def test_normals_sphere_iid_samples(rng):
    # clumped iid samples: typical error stays small, the worst case does not
    v = rng.normal(size=(500, 3))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    ang = angle_to_radial(estimate_normals(PointCloud(v), k=8), v)
    assert np.median(ang) <= 5.0


def test_normals_collinear():
    p = np.column_stack([np.arange(10.0), np.zeros(10), np.zeros(10)])
    with pytest.raises(DegenerateNeighborhood):
        estimate_normals(PointCloud(p), k=4)
