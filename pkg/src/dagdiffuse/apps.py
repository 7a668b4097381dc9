"""Desk-scale applications built on DAG propagation.

Colour restoration keeps a sparse set of coloured pixels, propagates their
``ab`` chroma over the four pixel DAGs with affinities computed from the
lightness channel, and re-attaches the lightness.  Affinities come from a
small learnable linear map of each pixel's 3x3 lightness patch, trained by
plain gradient descent through the propagation and kernel backward passes.

Sparse seeds need three conventions under the convex-combination update:
seed vertices have their incoming weights zeroed so their value is never
overwritten; negative affinities are clipped to zero (a zero weight stops
propagation); and colour directions are fused by propagating a confidence
channel alongside ``ab`` and dividing by it, so each restored value is a
convex combination of seed colours.
"""

from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np

from .builders import GridSpec, build_grid_dags
from .color import lab_to_rgb, rgb_to_lab
from .errors import DivergedLoss, MissingColors, MissingNormals, ShapeMismatch
from .graph import Dag
from .kernels import KernelConfig, edge_weights, kernel_backward
from .propagate import fuse_directions, group_edge_plan, propagate_backward, propagate_grouped

EVAL_KEEP_RATIOS = (0.01, 0.05, 0.10, 0.20)
_TINY = 1e-12


# -- geometric edge features ------------------------------------------------

def geometric_pairwise_features(cloud, graph):
    """Per-vertex ``(dX, dY, dZ, nx, ny, nz, r, g, b)``.

    ``dX..dZ`` is the mean displacement to the vertex's graph neighbours
    (zero for isolated vertices), which removes any dependence on absolute
    position.
    """
    if cloud.normals is None:
        raise MissingNormals("geometric features need normals")
    if cloud.colors is None:
        raise MissingColors("geometric features need colors")
    if isinstance(graph, Dag):
        e = graph.edges
        pairs = np.unique(np.sort(e, axis=1), axis=0) if len(e) else e
    else:
        pairs = graph.undirected_pairs()
    n = len(cloud)
    p = cloud.positions
    total = np.zeros((n, 3))
    count = np.zeros(n)
    if len(pairs):
        i, j = pairs[:, 0], pairs[:, 1]
        np.add.at(total, i, p[j] - p[i])
        np.add.at(total, j, p[i] - p[j])
        np.add.at(count, i, 1)
        np.add.at(count, j, 1)
    grad = np.zeros((n, 3))
    has = count > 0
    grad[has] = total[has] / count[has, None]
    return np.hstack([grad, cloud.normals, cloud.colors])


# -- pairwise embedding -----------------------------------------------------

@dataclass
class PairwiseEmbedding:
    """Linear map from a 9-value lightness patch to pairwise features."""

    weight: np.ndarray
    bias: np.ndarray

    def __post_init__(self):
        self.weight = np.asarray(self.weight, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64).ravel()
        if self.weight.ndim != 2 or self.bias.shape != (self.weight.shape[0],):
            raise ShapeMismatch("embedding weight must be (d_out, d_in) with a d_out bias")
        if not (np.isfinite(self.weight).all() and np.isfinite(self.bias).all()):
            raise ValueError("embedding has non-finite entries")

    @classmethod
    def initial(cls, d_out=8, d_in=9, seed=0):
        rng = np.random.default_rng(seed)
        return cls(rng.uniform(-0.1, 0.1, (d_out, d_in)), rng.uniform(-0.1, 0.1, d_out))

    def __call__(self, patches):
        return patches @ self.weight.T + self.bias

    def copy(self):
        return PairwiseEmbedding(self.weight.copy(), self.bias.copy())

    def save(self, path):
        d_out, d_in = self.weight.shape
        lines = [f"emb {d_out} {d_in}"]
        lines += [" ".join("%.17g" % v for v in row) for row in self.weight]
        lines.append(" ".join("%.17g" % v for v in self.bias))
        Path(path).write_text("\n".join(lines) + "\n")

    @classmethod
    def load(cls, path):
        rows = [line.split() for line in Path(path).read_text().splitlines() if line.strip()]
        if rows[0][0] != "emb":
            raise ValueError(f"{path}: bad embedding header")
        d_out, d_in = int(rows[0][1]), int(rows[0][2])
        w = np.array(rows[1:1 + d_out], dtype=np.float64).reshape(d_out, d_in)
        b = np.array(rows[1 + d_out], dtype=np.float64)
        return cls(w, b)


def lightness_patches(L):
    """``(H*W, 9)`` 3x3 neighbourhoods of ``L / 100``, edges replicated."""
    L = np.asarray(L, dtype=np.float64) / 100.0
    padded = np.pad(L, 1, mode="edge")
    win = np.lib.stride_tricks.sliding_window_view(padded, (3, 3))
    return win.reshape(L.size, 9)


@lru_cache(maxsize=16)
def grid_context(height, width):
    """Cached 4-direction grid DAGs and their propagation plans."""
    dagset = build_grid_dags(GridSpec(height, width))
    plans = tuple(group_edge_plan(d, s) for d, s in dagset)
    return dagset, plans


def _pairwise_sum(arrays):
    arrays = list(arrays)
    while len(arrays) > 1:
        nxt = [arrays[i] + arrays[i + 1] for i in range(0, len(arrays) - 1, 2)]
        if len(arrays) % 2:
            nxt.append(arrays[-1])
        arrays = nxt
    return arrays[0]


def _gated_weights(x, dagset, cfg, gate, nonnegative=False):
    out = []
    for dag in dagset.dags:
        w = edge_weights(x, dag, cfg)
        if nonnegative:
            w = np.maximum(w, 0.0)
        if gate is not None:
            w = np.where(gate[dag.dst], 0.0, w)
        out.append(w)
    return out


def keep_mask(shape, ratio, rng):
    """Boolean mask keeping ``round(ratio * size)`` randomly chosen pixels."""
    n = int(np.prod(shape))
    k = int(round(ratio * n))
    mask = np.zeros(n, dtype=bool)
    mask[rng.permutation(n)[:k]] = True
    return mask.reshape(shape)


def nested_keep_masks(shape, ratios, seed):
    """Masks for several ratios from one permutation, so larger ratios keep supersets."""
    n = int(np.prod(shape))
    perm = np.random.default_rng(seed).permutation(n)
    out = []
    for r in ratios:
        mask = np.zeros(n, dtype=bool)
        mask[perm[:int(round(r * n))]] = True
        out.append(mask.reshape(shape))
    return out


class ColorPropagator:
    """Forward and backward pass of sparse ``ab`` restoration on one image size."""

    def __init__(self, height, width, cfg=KernelConfig()):
        self.shape = (height, width)
        self.cfg = cfg
        self.dagset, self.plans = grid_context(height, width)

    def forward(self, x, ab, keep):
        """Return restored ``ab`` of shape ``(N, 2)`` and a cache for backward."""
        n = self.shape[0] * self.shape[1]
        keep = np.asarray(keep, dtype=bool).reshape(n)
        ab = np.asarray(ab, dtype=np.float64).reshape(n, 2)
        u = np.hstack([ab * keep[:, None], keep[:, None].astype(np.float64)])
        ws = _gated_weights(x, self.dagset, self.cfg, keep, nonnegative=True)
        hs = [
            propagate_grouped(s, d, w, u, plan=pl)
            for (d, s), w, pl in zip(self.dagset, ws, self.plans)
        ]
        total = _pairwise_sum(hs)
        den = total[:, 2]
        ok = den > _TINY
        safe = np.where(ok, den, 1.0)
        out = np.where(ok[:, None], total[:, :2] / safe[:, None], 0.0)
        cache = dict(x=x, u=u, keep=keep, ws=ws, hs=hs, ok=ok, den=safe, out=out)
        return out, cache

    def backward(self, cache, grad_out):
        """Gradient with respect to the pairwise features ``x``."""
        ok, den, out = cache["ok"], cache["den"], cache["out"]
        g_num = np.where(ok[:, None], grad_out / den[:, None], 0.0)
        g_den = np.where(ok, -np.sum(grad_out * out, axis=1) / den, 0.0)
        grad_h = np.hstack([g_num, g_den[:, None]])
        keep = cache["keep"]
        grad_x = np.zeros_like(cache["x"])
        for (dag, sched), w, h, plan in zip(self.dagset, cache["ws"], cache["hs"], self.plans):
            _, grad_w = propagate_backward(sched, dag, w, cache["u"], h, grad_h, plan=plan)
            grad_w[keep[dag.dst] | (w <= 0.0)] = 0.0
            grad_x += kernel_backward(cache["x"], dag, self.cfg, grad_w)[0]
        return grad_x


def restore_ab(L, sparse_ab, valid, emb, cfg=KernelConfig()):
    """Fill ``ab`` everywhere from the pixels flagged in ``valid``."""
    L = np.asarray(L, dtype=np.float64)
    h, w = L.shape
    if np.shape(sparse_ab) != (h, w, 2) or np.shape(valid) != (h, w):
        raise ShapeMismatch("lightness, ab and validity mask must share height and width")
    prop = ColorPropagator(h, w, cfg)
    out, _ = prop.forward(emb(lightness_patches(L)), sparse_ab, valid)
    return out.reshape(h, w, 2)


def colorize(L, sparse_ab, valid, emb, cfg=KernelConfig()):
    """Restore a colour image from lightness plus sparse ``ab``; returns sRGB."""
    ab = restore_ab(L, sparse_ab, valid, emb, cfg)
    return lab_to_rgb(np.concatenate([np.asarray(L, dtype=np.float64)[..., None], ab], axis=-1))


def masked_mse(pred_ab, true_ab, keep):
    """Mean squared ``ab`` error over pixels that were not kept."""
    free = ~np.asarray(keep, dtype=bool).reshape(-1)
    pred = np.asarray(pred_ab).reshape(-1, 2)
    true = np.asarray(true_ab).reshape(-1, 2)
    count = 2 * int(free.sum())
    if count == 0:
        return 0.0
    return float(np.sum((pred[free] - true[free]) ** 2) / count)


def colorization_loss(emb, samples, cfg=KernelConfig(), with_grad=True):
    """Mean masked MSE over ``samples`` of ``(lab_image, keep_mask)``.

    Returns ``(loss, grad_weight, grad_bias)``; gradients are ``None`` when
    ``with_grad`` is false.
    """
    loss = 0.0
    gw = np.zeros_like(emb.weight)
    gb = np.zeros_like(emb.bias)
    for lab, keep in samples:
        h, w = lab.shape[:2]
        prop = ColorPropagator(h, w, cfg)
        patches = lightness_patches(lab[..., 0])
        x = emb(patches)
        true = lab[..., 1:].reshape(-1, 2)
        out, cache = prop.forward(x, true, keep)
        free = ~keep.reshape(-1)
        count = max(2 * int(free.sum()), 1)
        resid = (out - true) * free[:, None]
        loss += float(np.sum(resid ** 2) / count)
        if with_grad:
            grad_x = prop.backward(cache, 2.0 * resid / count)
            gw += grad_x.T @ patches
            gb += grad_x.sum(axis=0)
    k = len(samples)
    if not with_grad:
        return loss / k, None, None
    return loss / k, gw / k, gb / k


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.01
    steps: int = 200
    keep_ratio: float = 0.02
    seed: int = 0
    kernel: KernelConfig = field(default_factory=KernelConfig)
    embedding_dim: int = 8
    max_grad_norm: float = 1.0

    def __post_init__(self):
        if not self.learning_rate >= 0:
            raise ValueError("learning_rate must be non-negative")
        if self.steps < 1:
            raise ValueError("steps must be >= 1")
        if not 0 < self.keep_ratio <= 1:
            raise ValueError("keep_ratio must be in (0, 1]")


def train_pairwise_embedding(images, cfg=TrainConfig(), on_step=None):
    """Fit the patch embedding by gradient descent on masked ``ab`` error.

    ``images`` are sRGB arrays ``(H, W, 3)`` in ``[0, 1]``.  One keep mask
    per image is drawn from ``cfg.seed`` and held fixed.  Returns the
    embedding and the loss trace, whose entry ``t`` is the loss before
    update ``t`` (``steps + 1`` entries).
    """
    if not images:
        raise ValueError("need at least one training image")
    rng = np.random.default_rng(cfg.seed)
    samples = [(rgb_to_lab(img), keep_mask(img.shape[:2], cfg.keep_ratio, rng)) for img in images]
    emb = PairwiseEmbedding.initial(cfg.embedding_dim, 9, cfg.seed)
    trace = []
    for step in range(cfg.steps + 1):
        last = step == cfg.steps
        loss, gw, gb = colorization_loss(emb, samples, cfg.kernel, with_grad=not last)
        if not np.isfinite(loss):
            raise DivergedLoss(step, loss)
        trace.append(loss)
        if on_step is not None:
            on_step(step, loss)
        if last:
            break
        norm = np.sqrt(np.sum(gw * gw) + np.sum(gb * gb))
        if cfg.max_grad_norm and norm > cfg.max_grad_norm:
            gw, gb = gw * (cfg.max_grad_norm / norm), gb * (cfg.max_grad_norm / norm)
        emb = PairwiseEmbedding(emb.weight - cfg.learning_rate * gw, emb.bias - cfg.learning_rate * gb)
    return emb, trace


def evaluate_keep_ratios(emb, image, ratios=EVAL_KEEP_RATIOS, seeds=range(5), cfg=KernelConfig()):
    """Reconstruction MSE per keep ratio, averaged over seeds."""
    lab = rgb_to_lab(image)
    h, w = lab.shape[:2]
    prop = ColorPropagator(h, w, cfg)
    x = emb(lightness_patches(lab[..., 0]))
    true = lab[..., 1:].reshape(-1, 2)
    mse = np.zeros(len(ratios))
    seeds = list(seeds)
    for seed in seeds:
        for k, keep in enumerate(nested_keep_masks((h, w), ratios, seed)):
            out, _ = prop.forward(x, true, keep)
            mse[k] += masked_mse(out, true, keep)
    return mse / len(seeds)


# -- scribbles and label refinement -------------------------------------------

def _graph_weights(dagset, pairwise, cfg, gate=None, nonnegative=False):
    pairwise = np.asarray(pairwise, dtype=np.float64)
    if pairwise.ndim != 2 or pairwise.shape[0] != dagset.num_vertices:
        raise ShapeMismatch(f"pairwise features {pairwise.shape} do not match {dagset.num_vertices} vertices")
    return _gated_weights(pairwise, dagset, cfg, gate, nonnegative)


def _propagate_fused(dagset, weights, u, fuse, sweeps):
    h = u
    for _ in range(sweeps):
        h = fuse_directions(
            [propagate_grouped(s, d, w, h) for (d, s), w in zip(dagset, weights)], fuse
        )
    return h


def scribble_propagate(dagset, pairwise, scribble, cfg=KernelConfig(), fuse="max", sweeps=1):
    """Spread a binary scribble over a graph; returns a soft mask in ``[0, 1]``.

    Scribbled vertices keep their value (their incoming weights are zeroed)
    and negative affinities are clipped to zero, as in colour restoration.
    """
    scribble = np.asarray(scribble, dtype=bool).ravel()
    if scribble.size != dagset.num_vertices:
        raise ShapeMismatch(f"scribble has {scribble.size} entries for {dagset.num_vertices} vertices")
    weights = _graph_weights(dagset, pairwise, cfg, scribble, nonnegative=True)
    u = scribble.astype(np.float64)[:, None]
    h = _propagate_fused(dagset, weights, u, fuse, sweeps)
    return np.clip(h[:, 0], 0.0, 1.0)


def scribble_propagate_image(L, scribble, emb, cfg=KernelConfig(), fuse="max", sweeps=1):
    L = np.asarray(L, dtype=np.float64)
    if np.shape(scribble) != L.shape:
        raise ShapeMismatch("scribble mask must match the image")
    dagset, _ = grid_context(*L.shape)
    x = emb(lightness_patches(L))
    return scribble_propagate(dagset, x, scribble, cfg, fuse, sweeps).reshape(L.shape)


def refine_labels(scores, dagset, pairwise, cfg=KernelConfig(), fuse="max", sweeps=1):
    """Propagate per-class scores and return ``(refined_scores, labels)``."""
    scores = np.asarray(scores, dtype=np.float64)
    if scores.ndim != 2 or scores.shape[0] != dagset.num_vertices or scores.shape[1] < 2:
        raise ShapeMismatch(f"scores {scores.shape} must be (N, C) with C >= 2")
    weights = _graph_weights(dagset, pairwise, cfg)
    refined = _propagate_fused(dagset, weights, scores, fuse, sweeps)
    return refined, np.argmax(refined, axis=1)


def two_region_image(size=32):
    """Synthetic sRGB test image: two regions of distinct lightness and hue.

    The left region is dark and reddish, the right region light and bluish;
    the boundary is a tilted line, and chroma varies smoothly inside each
    region.  Used by the training demo and the checks.
    """
    rr, cc = np.mgrid[0:size, 0:size] / (size - 1)
    right = cc + 0.25 * (rr - 0.5) > 0.5
    L = np.where(right, 75.0, 40.0)
    a = np.where(right, -10.0 + 12.0 * rr, 35.0 - 15.0 * rr)
    b = np.where(right, -30.0 + 10.0 * cc, 20.0 + 10.0 * cc)
    return lab_to_rgb(np.stack([L, a, b], axis=-1))
