"""Moving features between image pixels and graph vertices."""

from dataclasses import dataclass

import numpy as np

from .errors import ShapeMismatch, VertexOutOfRange


@dataclass(frozen=True, eq=False)
class CorrespondenceMap:
    """Pixel-to-vertex links, one row per ``(image, row, col) -> vertex``.

    A pixel maps to at most one vertex per image; a vertex may collect
    pixels from many images.  Pixels without a row here are uncovered.
    """

    image_id: np.ndarray
    row: np.ndarray
    col: np.ndarray
    vertex: np.ndarray

    def __post_init__(self):
        arrays = [np.asarray(getattr(self, k), dtype=np.int64).ravel()
                  for k in ("image_id", "row", "col", "vertex")]
        if len({a.size for a in arrays}) > 1:
            raise ShapeMismatch("correspondence columns differ in length")
        for k, a in zip(("image_id", "row", "col", "vertex"), arrays):
            if a.size and a.min() < 0:
                raise ValueError(f"negative {k} in correspondence map")
            object.__setattr__(self, k, a)
        key = np.stack(arrays[:3], axis=1)
        if len(np.unique(key, axis=0)) != len(key):
            raise ValueError("a pixel maps to more than one vertex in the same image")

    def __len__(self):
        return self.vertex.size

    @classmethod
    def from_pairs(cls, pairs):
        """Build from ``(image_id, row, col, vertex)`` tuples."""
        a = np.asarray(list(pairs), dtype=np.int64).reshape(-1, 4)
        return cls(a[:, 0], a[:, 1], a[:, 2], a[:, 3])

    def pixel_order(self):
        return np.lexsort((self.col, self.row, self.image_id))


def _as_images(pixel_features):
    if isinstance(pixel_features, np.ndarray):
        pixel_features = [pixel_features]
    out = []
    for img in pixel_features:
        img = np.asarray(img, dtype=np.float64)
        out.append(img[..., None] if img.ndim == 2 else img)
    return out


def aggregate_pixels_to_vertices(pixel_features, corr, n_vertices):
    """Average the features of all pixels linked to each vertex.

    ``pixel_features`` is one ``(H, W[, c])`` array or a list of them indexed
    by image id.  Returns ``(features, covered)``; uncovered vertices get
    zeros and ``covered[v] = False``.
    """
    images = _as_images(pixel_features)
    if len(corr) and corr.vertex.max() >= n_vertices:
        raise VertexOutOfRange(f"vertex {int(corr.vertex.max())} >= {n_vertices}")
    channels = images[0].shape[-1] if images else 1
    total = np.zeros((n_vertices, channels))
    count = np.zeros(n_vertices, dtype=np.int64)
    if len(corr):
        if corr.image_id.max() >= len(images):
            raise ShapeMismatch(f"image {int(corr.image_id.max())} not provided")
        order = corr.pixel_order()
        vals = np.empty((len(corr), channels))
        for k in np.unique(corr.image_id):
            sel = corr.image_id[order] == k
            r, c = corr.row[order][sel], corr.col[order][sel]
            img = images[k]
            if r.max() >= img.shape[0] or c.max() >= img.shape[1]:
                raise ShapeMismatch(f"pixel outside image {k} of shape {img.shape[:2]}")
            vals[sel] = img[r, c]
        verts = corr.vertex[order]
        # Average offsets from each vertex's first pixel so that constant
        # pixel sets come back bit-exact.
        first = np.zeros((n_vertices, channels))
        seen = np.unique(verts, return_index=True)
        first[seen[0]] = vals[seen[1]]
        np.add.at(total, verts, vals - first[verts])
        np.add.at(count, verts, 1)
    else:
        first = total
    covered = count > 0
    feats = np.zeros_like(total)
    feats[covered] = first[covered] + total[covered] / count[covered, None]
    return feats, covered


def project_vertices_to_pixels(vertex_features, corr, shape, image_id=0):
    """Copy each vertex's feature to its pixels in image ``image_id``.

    Returns ``(pixels, covered)`` with ``pixels`` of shape ``(H, W, c)``.
    """
    vf = np.asarray(vertex_features, dtype=np.float64)
    if vf.ndim == 1:
        vf = vf[:, None]
    if len(corr) and corr.vertex.max() >= vf.shape[0]:
        raise VertexOutOfRange(f"vertex {int(corr.vertex.max())} >= {vf.shape[0]}")
    h, w = shape[:2]
    out = np.zeros((h, w, vf.shape[1]))
    covered = np.zeros((h, w), dtype=bool)
    sel = corr.image_id == image_id
    r, c, v = corr.row[sel], corr.col[sel], corr.vertex[sel]
    if r.size and (r.max() >= h or c.max() >= w):
        raise ShapeMismatch(f"pixel outside image of shape {(h, w)}")
    out[r, c] = vf[v]
    covered[r, c] = True
    return out, covered


def label_map_correspondence(labels):
    """Correspondences for a superpixel label map: pixel -> its label."""
    labels = np.asarray(labels)
    rr, cc = np.indices(labels.shape)
    return CorrespondenceMap(np.zeros(labels.size, dtype=np.int64), rr.ravel(), cc.ravel(), labels.ravel())
