"""Building direction-paired DAG sets from grids, superpixels and point clouds."""

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .errors import (
    DegenerateCentroids,
    DegenerateNeighborhood,
    MissingNormals,
    ShapeMismatch,
)
from .graph import Dag, MultiDagSet

GRID_TAGS = ("left_to_right", "right_to_left", "top_to_bottom", "bottom_to_top")
CLOUD_TAGS = ("+x", "-x", "+y", "-y", "+z", "-z")

JITTER_ATTEMPTS = 8


@dataclass(frozen=True)
class GridSpec:
    height: int
    width: int

    def __post_init__(self):
        if self.height < 1 or self.width < 1:
            raise ValueError(f"grid must be at least 1x1, got {self.height}x{self.width}")

    @property
    def num_vertices(self):
        return self.height * self.width

    def vertex(self, r, c):
        return r * self.width + c


def _pairs_to_dagset(n, axis_edges, tags):
    """``axis_edges[a]`` holds forward ``(src, dst)`` edges for axis ``a``."""
    dags = []
    for a, edges in enumerate(axis_edges):
        edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        dags.append(Dag(n, edges, tags[2 * a]))
        dags.append(Dag(n, edges[:, ::-1], tags[2 * a + 1]))
    return MultiDagSet(dags)


def build_grid_dags(spec):
    """Four 3-way pixel DAGs: left-to-right, right-to-left, top-down, bottom-up.

    In the left-to-right DAG pixel ``(r, c)`` is fed by ``(r-1, c-1)``,
    ``(r, c-1)`` and ``(r+1, c-1)`` where those exist; the others follow by
    symmetry.
    """
    h, w = spec.height, spec.width
    ids = np.arange(h * w).reshape(h, w)
    horiz, vert = [], []
    for dr in (-1, 0, 1):
        # predecessor (r+dr, c-1) -> (r, c)
        r0, r1 = max(0, -dr), min(h, h - dr)
        if w > 1 and r1 > r0:
            dst = ids[r0:r1, 1:]
            src = ids[r0 + dr:r1 + dr, :-1]
            horiz.append(np.stack([src.ravel(), dst.ravel()], axis=1))
        # predecessor (r-1, c+dr) -> (r, c)
        c0, c1 = max(0, -dr), min(w, w - dr)
        if h > 1 and c1 > c0:
            dst = ids[1:, c0:c1]
            src = ids[:-1, c0 + dr:c1 + dr]
            vert.append(np.stack([src.ravel(), dst.ravel()], axis=1))
    horiz = np.concatenate(horiz) if horiz else np.zeros((0, 2), dtype=np.int64)
    vert = np.concatenate(vert) if vert else np.zeros((0, 2), dtype=np.int64)
    horiz = horiz[np.lexsort((horiz[:, 0], horiz[:, 1]))]
    vert = vert[np.lexsort((vert[:, 0], vert[:, 1]))]
    return _pairs_to_dagset(h * w, [horiz, vert], GRID_TAGS)


def _jitter_coincident(coords, pairs, seed, scale):
    """Offset coordinates of vertices in coincident pairs until all differ.

    Offsets have norm below ``0.25 * scale``.  Raises DegenerateCentroids if
    some pair still coincides after the allowed attempts.
    """
    coords = np.array(coords, dtype=np.float64)
    if not len(pairs):
        return coords
    rng = np.random.default_rng(seed)
    dim = coords.shape[1]
    for _ in range(JITTER_ATTEMPTS + 1):
        same = np.all(coords[pairs[:, 0]] == coords[pairs[:, 1]], axis=1)
        if not same.any():
            return coords
        movers = np.unique(pairs[same])
        direction = rng.normal(size=(movers.size, dim))
        direction /= np.linalg.norm(direction, axis=1, keepdims=True)
        radius = rng.uniform(0.05, 0.2, size=(movers.size, 1)) * scale
        coords[movers] += direction * radius
    raise DegenerateCentroids(f"{int(same.sum())} neighbor pairs still coincide after jitter")


def _orient_by_axis(pairs, coords, num_axes):
    """Assign every undirected pair to its dominant axis, oriented low -> high."""
    axis_edges = [[] for _ in range(num_axes)]
    if not len(pairs):
        return [np.zeros((0, 2), dtype=np.int64) for _ in range(num_axes)]
    delta = coords[pairs[:, 1]] - coords[pairs[:, 0]]
    axis = np.argmax(np.abs(delta), axis=1)
    forward = delta[np.arange(len(pairs)), axis] > 0
    oriented = np.where(forward[:, None], pairs, pairs[:, ::-1])
    for a in range(num_axes):
        e = oriented[axis == a]
        axis_edges[a] = e[np.lexsort((e[:, 0], e[:, 1]))]
    return axis_edges


def superpixel_adjacency(labels):
    """Sorted unique ``(i, j)``, ``i < j``, of 4-connected neighboring labels."""
    labels = np.asarray(labels, dtype=np.int64)
    a = np.concatenate([labels[:, :-1].ravel(), labels[:-1, :].ravel()])
    b = np.concatenate([labels[:, 1:].ravel(), labels[1:, :].ravel()])
    diff = a != b
    pairs = np.sort(np.stack([a[diff], b[diff]], axis=1), axis=1)
    if not len(pairs):
        return np.zeros((0, 2), dtype=np.int64)
    return np.unique(pairs, axis=0)


def superpixel_centroids(labels):
    labels = np.asarray(labels, dtype=np.int64)
    s = int(labels.max()) + 1
    rr, cc = np.indices(labels.shape)
    count = np.bincount(labels.ravel(), minlength=s)
    rows = np.bincount(labels.ravel(), weights=rr.ravel(), minlength=s) / count
    cols = np.bincount(labels.ravel(), weights=cc.ravel(), minlength=s) / count
    return np.stack([rows, cols], axis=1)


def build_superpixel_dags(labels, jitter_seed=0):
    """Four DAGs over superpixels sharing a pixel boundary.

    Each adjacent pair lands on the horizontal axis when its centroid column
    gap is at least its row gap, otherwise on the vertical axis, and is
    oriented by centroid order along that axis.  Returns ``(dagset,
    centroids)`` where ``centroids`` are the (possibly jittered) ``(row,
    col)`` positions used for orientation.
    """
    labels = np.asarray(labels)
    if labels.ndim != 2 or labels.size == 0:
        raise ShapeMismatch("label map must be a non-empty 2-D array")
    if labels.min() < 0:
        raise ValueError("superpixel labels must be non-negative")
    s = int(labels.max()) + 1
    present = np.bincount(labels.ravel().astype(np.int64), minlength=s) > 0
    if not present.all():
        raise ValueError(f"labels {np.flatnonzero(~present).tolist()} are missing from the map")
    pairs = superpixel_adjacency(labels)
    centroids = _jitter_coincident(superpixel_centroids(labels), pairs, jitter_seed, 1.0)
    # (row, col) -> (col, row) so axis 0 is horizontal and wins ties.
    xy = centroids[:, ::-1]
    horiz, vert = _orient_by_axis(pairs, xy, 2)
    return _pairs_to_dagset(s, [horiz, vert], GRID_TAGS), centroids


@dataclass(frozen=True, eq=False)
class PointCloud:
    positions: np.ndarray
    normals: np.ndarray = None
    colors: np.ndarray = None

    def __post_init__(self):
        p = np.asarray(self.positions, dtype=np.float64)
        if p.ndim != 2 or p.shape[1] != 3 or len(p) < 1:
            raise ShapeMismatch(f"positions must be (N, 3), got {p.shape}")
        object.__setattr__(self, "positions", p)
        for name in ("normals", "colors"):
            v = getattr(self, name)
            if v is None:
                continue
            v = np.asarray(v, dtype=np.float64)
            if v.shape != p.shape:
                raise ShapeMismatch(f"{name} must be {p.shape}, got {v.shape}")
            object.__setattr__(self, name, v)
        if self.normals is not None:
            err = np.abs(np.linalg.norm(self.normals, axis=1) - 1.0)
            if err.max() > 1e-6:
                raise ValueError("normals must have unit length")

    def __len__(self):
        return len(self.positions)

    def with_normals(self, normals):
        return PointCloud(self.positions, normals, self.colors)

    def translated(self, offset):
        return PointCloud(self.positions + np.asarray(offset, dtype=np.float64), self.normals, self.colors)

    def permuted(self, perm):
        pick = lambda a: None if a is None else a[perm]
        return PointCloud(self.positions[perm], pick(self.normals), pick(self.colors))


EUCLIDEAN = "euclidean"
TANGENT = "tangent"


@dataclass(frozen=True)
class NeighborMode:
    """``radius=None`` resolves to twice the median nearest-neighbor distance."""

    mode: str = EUCLIDEAN
    radius: float = None
    k: int = 6

    def __post_init__(self):
        if self.mode not in (EUCLIDEAN, TANGENT):
            raise ValueError(f"unknown neighbor mode {self.mode!r}")
        if self.radius is not None and not self.radius > 0:
            raise ValueError("radius must be positive")
        if self.k < 1:
            raise ValueError("k must be >= 1")

    def resolved(self, cloud):
        if self.radius is not None:
            return self
        return NeighborMode(self.mode, default_radius(cloud), self.k)


def default_radius(cloud):
    p = cloud.positions
    if len(p) < 2:
        return 1.0
    d, _ = cKDTree(p).query(p, k=2)
    med = float(np.median(d[:, 1]))
    return 2.0 * med if med > 0 else 1.0


def point_distances(positions, query, ids):
    diff = positions[ids] - positions[query]
    return np.sqrt(np.sum(diff * diff, axis=1))


def knn_search(cloud, query, mode, tree=None):
    """All points strictly within ``mode.radius`` of ``query``, nearest first.

    Returns ``(ids, distances)``; ties in distance are broken by id.  The
    spatial tree only proposes candidates; membership and distances come
    from an exact recomputation.
    """
    if mode.radius is None:
        mode = mode.resolved(cloud)
    p = cloud.positions
    if tree is None:
        tree = cKDTree(p)
    r = mode.radius
    cand = np.asarray(tree.query_ball_point(p[query], r * (1 + 1e-9) + 1e-300), dtype=np.int64)
    cand = cand[cand != query]
    dist = point_distances(p, query, cand)
    keep = dist < r
    cand, dist = cand[keep], dist[keep]
    order = np.lexsort((cand, dist))
    return cand[order], dist[order]


def tangent_select(cloud, query, candidates, k):
    """The ``k`` candidates closest to the tangent plane at ``query``.

    Distance is ``|(P(query) - P(j)) . n(query)|``; ties fall back to the
    Euclidean distance and then the id.
    """
    if cloud.normals is None:
        raise MissingNormals("tangent selection needs normals")
    ids, dist = candidates
    ids = np.asarray(ids, dtype=np.int64)
    dist = np.asarray(dist, dtype=np.float64)
    p = cloud.positions
    proj = np.abs((p[query] - p[ids]) @ cloud.normals[query])
    order = np.lexsort((ids, dist, proj))
    return ids[order[:k]]


def neighbor_sets(cloud, mode):
    """Selected neighbors of every point, before symmetrization."""
    mode = mode.resolved(cloud)
    if mode.mode == TANGENT and cloud.normals is None:
        raise MissingNormals("tangent mode needs normals")
    tree = cKDTree(cloud.positions)
    out = []
    for i in range(len(cloud)):
        ids, dist = knn_search(cloud, i, mode, tree)
        if mode.mode == TANGENT:
            out.append(tangent_select(cloud, i, (ids, dist), mode.k))
        else:
            out.append(ids[:mode.k])
    return out


def symmetric_pairs(neighbors):
    rows = [np.stack([np.full(len(nb), i), nb], axis=1) for i, nb in enumerate(neighbors) if len(nb)]
    if not rows:
        return np.zeros((0, 2), dtype=np.int64)
    pairs = np.sort(np.concatenate(rows).astype(np.int64), axis=1)
    return np.unique(pairs, axis=0)


def build_pointcloud_dags(cloud, mode=NeighborMode(), jitter_seed=0):
    """Six axis DAGs (+x, -x, +y, -y, +z, -z) over a symmetric neighbor graph.

    A pair is linked when either point selects the other.  Each link goes to
    the axis of its largest displacement component and points from the
    lower to the higher coordinate in the ``+`` DAG.
    """
    mode = mode.resolved(cloud)
    pairs = symmetric_pairs(neighbor_sets(cloud, mode))
    coords = _jitter_coincident(cloud.positions, pairs, jitter_seed, 1e-3 * mode.radius)
    return _pairs_to_dagset(len(cloud), _orient_by_axis(pairs, coords, 3), CLOUD_TAGS)


def _orient_normals(n, tol=1e-9):
    flip = (n[:, 2] < -tol) | (
        (np.abs(n[:, 2]) <= tol) & ((n[:, 1] < -tol) | ((np.abs(n[:, 1]) <= tol) & (n[:, 0] < 0)))
    )
    n = np.where(flip[:, None], -n, n)
    return n / np.linalg.norm(n, axis=1, keepdims=True)


def estimate_normals(cloud, k=8):
    """PCA normals from the ``k`` nearest points (the point itself included).

    Signs follow ``z >= 0``, then ``y >= 0``, then ``x >= 0``.
    """
    p = cloud.positions if isinstance(cloud, PointCloud) else np.asarray(cloud, dtype=np.float64)
    if len(p) < 3 or k < 3:
        raise ValueError("normal estimation needs at least 3 points and k >= 3")
    k = min(k, len(p))
    _, idx = cKDTree(p).query(p, k=k)
    nb = p[idx]
    centered = nb - nb.mean(axis=1, keepdims=True)
    cov = np.einsum("nki,nkj->nij", centered, centered) / k
    evals, evecs = np.linalg.eigh(cov)
    top = evals[:, 2]
    degenerate = evals[:, 1] <= 1e-12 * np.maximum(top, np.finfo(float).tiny)
    if degenerate.any():
        raise DegenerateNeighborhood(
            f"collinear neighborhood around point {int(np.argmax(degenerate))}"
        )
    return _orient_normals(evecs[:, :, 0])
