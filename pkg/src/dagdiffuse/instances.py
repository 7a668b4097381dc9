"""Seeded random problem instances for property checks."""

import numpy as np

from .graph import Dag
from .kernels import stabilize_weights


def random_dag(rng, n, density=0.3, tag="random"):
    """Random DAG: edges only go from lower to higher rank of a random order."""
    rank = rng.permutation(n)
    i, j = np.triu_indices(n, k=1)
    keep = rng.random(i.size) < density
    a, b = i[keep], j[keep]
    # vertex rank[a] precedes rank[b]
    edges = np.stack([rank[a], rank[b]], axis=1)
    return Dag(n, edges[rng.permutation(len(edges))], tag)


def random_weights(rng, dag, nonnegative=False, stabilize=True):
    lo = 0.0 if nonnegative else -1.0
    w = rng.uniform(lo, 1.0, dag.num_edges)
    return stabilize_weights(w, dag) if stabilize else w


def random_instance(rng, max_n=64, max_c=8, nonnegative=False):
    n = int(rng.integers(1, max_n + 1))
    c = int(rng.integers(1, max_c + 1))
    dag = random_dag(rng, n, density=float(rng.uniform(0.02, 0.4)))
    w = random_weights(rng, dag, nonnegative)
    u = rng.normal(size=(n, c))
    return dag, w, u


def relative_error(actual, expected, floor=1e-8):
    actual = np.asarray(actual, dtype=np.float64)
    expected = np.asarray(expected, dtype=np.float64)
    scale = max(float(np.max(np.abs(expected), initial=0.0)), floor)
    return float(np.max(np.abs(actual - expected), initial=0.0)) / scale


def central_difference(f, x, step=1e-6):
    """Numerical gradient of scalar ``f`` at array ``x``."""
    x = np.array(x, dtype=np.float64)
    grad = np.zeros_like(x)
    flat, g = x.reshape(-1), grad.reshape(-1)
    for k in range(flat.size):
        orig = flat[k]
        flat[k] = orig + step
        hi = f(x)
        flat[k] = orig - step
        lo = f(x)
        flat[k] = orig
        g[k] = (hi - lo) / (2 * step)
    return grad
