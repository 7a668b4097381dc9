"""Text and binary file formats used by the command line.

* graph: ``dag <N> <E> <tag>`` then ``<src> <dst>`` per line
* weights: one ``%.17g`` value per line, aligned with the graph's edges
* feature matrix: ``fm <N> <c>`` then ``N`` lines of ``c`` values
* images: binary PPM (P6) and PGM (P5, 8 or 16 bit)
* point clouds: ASCII XYZ and ASCII PLY
* correspondences: ``<image_id> <row> <col> <vertex>`` per line
"""

import os
from pathlib import Path

import numpy as np

from .aggregate import CorrespondenceMap
from .builders import PointCloud
from .graph import Dag, MultiDagSet


def _fmt(v):
    return "%.17g" % v


def write_dag(path, dag):
    lines = [f"dag {dag.num_vertices} {dag.num_edges} {dag.direction_tag}"]
    lines += [f"{s} {d}" for s, d in dag.edges.tolist()]
    Path(path).write_text("\n".join(lines) + "\n")


def read_dag(path):
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 4 or header[0] != "dag":
            raise ValueError(f"{path}: bad graph header {header}")
        n, e, tag = int(header[1]), int(header[2]), header[3]
        edges = np.loadtxt(fh, dtype=np.int64, ndmin=2) if e else np.zeros((0, 2), dtype=np.int64)
    if len(edges) != e:
        raise ValueError(f"{path}: header declares {e} edges, found {len(edges)}")
    return Dag(n, edges.reshape(-1, 2), tag)


def write_dagset(directory, dagset):
    """One ``NN_<tag>.dag`` file per direction; the prefix keeps pair order."""
    os.makedirs(directory, exist_ok=True)
    paths = []
    for k, dag in enumerate(dagset.dags):
        path = Path(directory) / f"{k:02d}_{_safe(dag.direction_tag)}.dag"
        write_dag(path, dag)
        paths.append(path)
    return paths


def _safe(tag):
    return tag.replace("+", "pos").replace("-", "neg") if tag[0] in "+-" else tag


def read_dagset(directory):
    paths = sorted(Path(directory).glob("*.dag"))
    if not paths:
        raise FileNotFoundError(f"no .dag files in {directory}")
    return MultiDagSet([read_dag(p) for p in paths])


def write_weights(path, w):
    Path(path).write_text("".join(_fmt(v) + "\n" for v in np.asarray(w, dtype=np.float64)))


def read_weights(path):
    return np.loadtxt(path, dtype=np.float64, ndmin=1)


def write_weight_set(directory, dagset, weights):
    os.makedirs(directory, exist_ok=True)
    for k, (dag, w) in enumerate(zip(dagset.dags, weights)):
        write_weights(Path(directory) / f"{k:02d}_{_safe(dag.direction_tag)}.w", w)


def read_weight_set(directory, dagset):
    paths = sorted(Path(directory).glob("*.w"))
    if len(paths) != len(dagset):
        raise ValueError(f"{directory}: {len(paths)} weight files for {len(dagset)} dags")
    out = []
    for p, dag in zip(paths, dagset.dags):
        w = read_weights(p)
        if w.shape != (dag.num_edges,):
            raise ValueError(f"{p}: {w.size} weights for {dag.num_edges} edges")
        out.append(w)
    return out


def write_fm(path, values):
    values = np.asarray(values, dtype=np.float64)
    if values.ndim == 1:
        values = values[:, None]
    lines = [f"fm {values.shape[0]} {values.shape[1]}"]
    lines += [" ".join(_fmt(v) for v in row) for row in values]
    Path(path).write_text("\n".join(lines) + "\n")


def read_fm(path):
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 3 or header[0] != "fm":
            raise ValueError(f"{path}: bad feature header {header}")
        n, c = int(header[1]), int(header[2])
        data = np.loadtxt(fh, dtype=np.float64, ndmin=2) if n else np.zeros((0, c))
    return data.reshape(n, c)


# -- netpbm -----------------------------------------------------------------

def _read_tokens(fh, count):
    tokens = []
    while len(tokens) < count:
        line = fh.readline()
        if not line:
            raise ValueError("truncated netpbm header")
        line = line.split(b"#")[0]
        tokens += line.split()
    return tokens


def read_netpbm(path):
    """Read P5/P6 into an integer array plus its maxval."""
    with open(path, "rb") as fh:
        magic, w, h, maxval = _read_tokens(fh, 4)
        w, h, maxval = int(w), int(h), int(maxval)
        channels = {b"P5": 1, b"P6": 3}.get(magic)
        if channels is None:
            raise ValueError(f"{path}: unsupported netpbm type {magic!r}")
        dtype = np.dtype(">u2") if maxval > 255 else np.dtype(np.uint8)
        raw = np.frombuffer(fh.read(w * h * channels * dtype.itemsize), dtype=dtype)
    if raw.size != w * h * channels:
        raise ValueError(f"{path}: truncated pixel data")
    arr = raw.reshape(h, w, channels).astype(np.int64)
    return (arr[..., 0] if channels == 1 else arr), maxval


def write_netpbm(path, arr, maxval=255):
    arr = np.asarray(arr)
    magic = b"P5" if arr.ndim == 2 else b"P6"
    h, w = arr.shape[:2]
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(b"%s\n%d %d\n%d\n" % (magic, w, h, maxval))
        fh.write(np.ascontiguousarray(arr, dtype=dtype).tobytes())


def read_image(path):
    """PPM/PGM as floats in ``[0, 1]``."""
    arr, maxval = read_netpbm(path)
    return arr.astype(np.float64) / maxval


def write_image(path, img):
    img = np.clip(np.asarray(img, dtype=np.float64), 0.0, 1.0)
    write_netpbm(path, np.rint(img * 255).astype(np.int64), 255)


def read_labels(path):
    arr, _ = read_netpbm(path)
    if arr.ndim != 2:
        raise ValueError(f"{path}: label map must be a PGM")
    return arr


def write_labels(path, labels):
    labels = np.asarray(labels, dtype=np.int64)
    write_netpbm(path, labels, 65535 if labels.max() > 255 else 255)


def read_mask(path):
    return read_labels(path) > 0


def write_mask(path, mask):
    write_netpbm(path, np.where(np.asarray(mask), 255, 0), 255)


# -- point clouds -----------------------------------------------------------

def _cloud_from_columns(data, source):
    if data.shape[1] not in (3, 6, 9):
        raise ValueError(f"{source}: expected 3, 6 or 9 columns, got {data.shape[1]}")
    normals = data[:, 3:6] if data.shape[1] >= 6 else None
    colors = data[:, 6:9] if data.shape[1] == 9 else None
    return PointCloud(data[:, :3], normals, colors)


def read_xyz(path):
    """``x y z [nx ny nz] [r g b]`` per line; colors in ``[0, 1]``."""
    return _cloud_from_columns(np.loadtxt(path, dtype=np.float64, ndmin=2), path)


def write_xyz(path, cloud):
    cols = [cloud.positions]
    if cloud.normals is not None:
        cols.append(cloud.normals)
        if cloud.colors is not None:
            cols.append(cloud.colors)
    data = np.hstack(cols)
    Path(path).write_text("".join(" ".join(_fmt(v) for v in row) + "\n" for row in data))


def read_ply(path):
    """ASCII PLY with vertex properties x, y, z and optional nx..nz, red..blue."""
    with open(path) as fh:
        if fh.readline().strip() != "ply":
            raise ValueError(f"{path}: not a PLY file")
        props, count, in_vertex, fmt = [], None, False, None
        for line in fh:
            parts = line.split()
            if not parts:
                continue
            if parts[0] == "format":
                fmt = parts[1]
            elif parts[0] == "element":
                in_vertex = parts[1] == "vertex"
                if in_vertex:
                    count = int(parts[2])
            elif parts[0] == "property" and in_vertex:
                props.append(parts[-1])
            elif parts[0] == "end_header":
                break
        if fmt != "ascii":
            raise ValueError(f"{path}: only ASCII PLY is supported")
        rows = [fh.readline().split() for _ in range(count)]
    data = np.asarray(rows, dtype=np.float64).reshape(count, len(props))
    col = {name: data[:, i] for i, name in enumerate(props)}
    pos = np.stack([col["x"], col["y"], col["z"]], axis=1)
    normals = None
    if all(k in col for k in ("nx", "ny", "nz")):
        normals = np.stack([col["nx"], col["ny"], col["nz"]], axis=1)
    colors = None
    if all(k in col for k in ("red", "green", "blue")):
        colors = np.stack([col["red"], col["green"], col["blue"]], axis=1)
        if colors.max() > 1.0:
            colors = colors / 255.0
    return PointCloud(pos, normals, colors)


def read_cloud(path):
    return read_ply(path) if str(path).lower().endswith(".ply") else read_xyz(path)


# -- correspondences, embeddings, config ------------------------------------

def read_correspondences(path):
    data = np.loadtxt(path, dtype=np.int64, ndmin=2)
    if data.size == 0:
        data = np.zeros((0, 4), dtype=np.int64)
    return CorrespondenceMap(data[:, 0], data[:, 1], data[:, 2], data[:, 3])


def write_correspondences(path, corr):
    rows = zip(corr.image_id.tolist(), corr.row.tolist(), corr.col.tolist(), corr.vertex.tolist())
    Path(path).write_text("".join(f"{a} {b} {c} {d}\n" for a, b, c, d in rows))


def read_config(path):
    """``key=value`` lines; ``#`` starts a comment.  Keys use dashes or underscores."""
    out = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#")[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key=value")
        key, value = line.split("=", 1)
        out[key.strip().replace("-", "_")] = value.strip()
    return out
