"""Edge weights from pairwise features via symmetric kernels.

Two kernels are provided: an inner product of L2-normalised features
(values in ``[-1, 1]``) and an embedded Gaussian with an additive bias
(values in ``(bias, 1 + bias]``).  Weights are then stabilised so that the
absolute incoming weights of every vertex sum to at most one.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ShapeMismatch

INNER_PRODUCT = "inner_product"
EMBEDDED_GAUSSIAN = "embedded_gaussian"

_ALIASES = {
    "prod": INNER_PRODUCT,
    "inner_product": INNER_PRODUCT,
    "embed": EMBEDDED_GAUSSIAN,
    "embedded_gaussian": EMBEDDED_GAUSSIAN,
}


@dataclass(frozen=True)
class KernelConfig:
    kind: str = INNER_PRODUCT
    bias: float = -0.5
    epsilon: float = 1e-12

    def __post_init__(self):
        try:
            object.__setattr__(self, "kind", _ALIASES[self.kind])
        except KeyError:
            raise ValueError(f"unknown kernel {self.kind!r}") from None
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if not np.isfinite(self.bias):
            raise ValueError("bias must be finite")


def _check(x, dag):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] != dag.num_vertices:
        raise ShapeMismatch(f"features {x.shape} do not match {dag.num_vertices} vertices")
    return x


def normalize_rows(x, epsilon=1e-12):
    norms = np.sqrt(np.sum(x * x, axis=1))
    return x / np.maximum(norms, epsilon)[:, None], norms


def _cosine(a, b, epsilon):
    # sqrt(d * d) == d exactly, so identical rows give exactly 1
    sq = epsilon * epsilon
    den = np.sqrt(np.maximum(np.sum(a * a, axis=1), sq) * np.maximum(np.sum(b * b, axis=1), sq))
    return np.sum(a * b, axis=1) / den


def pair_kernel(a, b, cfg):
    """Kernel value for row pairs ``(a[n], b[n])``; symmetric in ``a`` and ``b``."""
    a = np.atleast_2d(np.asarray(a, dtype=np.float64))
    b = np.atleast_2d(np.asarray(b, dtype=np.float64))
    if cfg.kind == INNER_PRODUCT:
        return _cosine(a, b, cfg.epsilon)
    diff = a - b
    return np.exp(-np.sum(diff * diff, axis=1)) + cfg.bias


def edge_weights_inner_product(x, dag, cfg=KernelConfig()):
    """Cosine similarity between the endpoint features of every edge."""
    x = _check(x, dag)
    return _cosine(x[dag.dst], x[dag.src], cfg.epsilon)


def edge_weights_embedded_gaussian(x, dag, cfg=KernelConfig(EMBEDDED_GAUSSIAN)):
    """``exp(-|x_i - x_j|^2) + bias`` for every edge."""
    x = _check(x, dag)
    diff = x[dag.dst] - x[dag.src]
    return np.exp(-np.sum(diff * diff, axis=1)) + cfg.bias


def raw_edge_weights(x, dag, cfg):
    if cfg.kind == INNER_PRODUCT:
        return edge_weights_inner_product(x, dag, cfg)
    return edge_weights_embedded_gaussian(x, dag, cfg)


def incoming_sum(values, dag):
    order = dag.accumulation_order()
    s = np.zeros(dag.num_vertices)
    np.add.at(s, dag.dst[order], values[order])
    return s


def stabilize_weights(w, dag):
    """Rescale each vertex's incoming weights when their absolute sum exceeds 1."""
    w = np.asarray(w, dtype=np.float64)
    s = incoming_sum(np.abs(w), dag)
    scale = np.where(s > 1.0, s, 1.0)
    return w / scale[dag.dst]


def edge_weights(x, dag, cfg, stabilize=True):
    w = raw_edge_weights(x, dag, cfg)
    return stabilize_weights(w, dag) if stabilize else w


def kernel_backward(x, dag, cfg, grad_g, stabilize=True):
    """Gradient of a scalar loss with respect to ``x`` and the kernel bias.

    ``grad_g`` is the gradient with respect to the (stabilised, if
    ``stabilize``) edge weights.  Returns ``(grad_x, grad_bias)``; the bias
    gradient is zero for the inner-product kernel.
    """
    x = _check(x, dag)
    grad_g = np.asarray(grad_g, dtype=np.float64)
    if grad_g.shape != (dag.num_edges,):
        raise ShapeMismatch(f"grad_g has shape {grad_g.shape}, expected ({dag.num_edges},)")
    src, dst = dag.src, dag.dst
    raw = raw_edge_weights(x, dag, cfg)

    if stabilize:
        s = incoming_sum(np.abs(raw), dag)
        dot = incoming_sum(grad_g * raw, dag)
        active = s[dst] > 1.0
        sd = np.where(active, s[dst], 1.0)
        grad_raw = np.where(
            active,
            grad_g / sd - np.sign(raw) * dot[dst] / (sd * sd),
            grad_g,
        )
    else:
        grad_raw = grad_g

    grad_x = np.zeros_like(x)
    if cfg.kind == INNER_PRODUCT:
        xb, norms = normalize_rows(x, cfg.epsilon)
        grad_xb = np.zeros_like(x)
        np.add.at(grad_xb, dst, grad_raw[:, None] * xb[src])
        np.add.at(grad_xb, src, grad_raw[:, None] * xb[dst])
        smooth = norms > cfg.epsilon
        radial = np.sum(xb * grad_xb, axis=1, keepdims=True)
        grad_x = np.where(
            smooth[:, None],
            (grad_xb - xb * radial) / np.where(smooth, norms, 1.0)[:, None],
            grad_xb / cfg.epsilon,
        )
        return grad_x, 0.0

    diff = x[dst] - x[src]
    coef = -2.0 * grad_raw * np.exp(-np.sum(diff * diff, axis=1))
    np.add.at(grad_x, dst, coef[:, None] * diff)
    np.add.at(grad_x, src, -coef[:, None] * diff)
    return grad_x, float(np.sum(grad_raw))
