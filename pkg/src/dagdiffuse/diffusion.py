"""Global operator of one propagation sweep and diffusion checks.

One sweep maps the stacked unary features ``U`` to ``H = M U``.  The raw
per-edge matrix ``L0`` (degree on the diagonal, ``-g`` off it) has zero row
sums by construction.  Expanding the recurrence through the schedule
gives the dense operator ``M``; every row of ``M`` sums to one, so
``L_eff = I - M`` is again a Laplacian and ``H - U = -L_eff U``.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .propagate import compute_degree, group_edge_plan

MAX_DENSE_VERTICES = 2000


@dataclass(frozen=True, eq=False)
class GlobalLaplacian:
    raw: sp.csr_matrix
    expanded: np.ndarray

    @property
    def effective(self):
        return np.eye(self.expanded.shape[0]) - self.expanded


@dataclass(frozen=True)
class DiffusionReport:
    row_sum_residual: float
    operator_residual: float
    raw_row_sum_residual: float
    tolerance: float = 1e-12

    @property
    def passed(self):
        return (
            self.row_sum_residual <= self.tolerance
            and self.operator_residual <= self.tolerance
            and self.raw_row_sum_residual <= self.tolerance
        )


def assemble_laplacian(dag, schedule, w):
    """Build the raw matrix ``L0`` and the expanded sweep operator ``M``."""
    n = dag.num_vertices
    if n > MAX_DENSE_VERTICES:
        raise ValueError(f"dense assembly limited to {MAX_DENSE_VERTICES} vertices, got {n}")
    w = np.asarray(w, dtype=np.float64)
    plan = group_edge_plan(dag, schedule)
    d = compute_degree(dag, w)

    rows = np.concatenate([np.arange(n), dag.dst])
    cols = np.concatenate([np.arange(n), dag.src])
    vals = np.concatenate([d, -w])
    raw = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))

    m = np.zeros((n, n))
    src, dst = dag.src, dag.dst
    for p, verts in enumerate(schedule.groups):
        m[verts, verts] = 1.0 - d[verts]
        e = plan[p]
        if e.size:
            np.add.at(m, dst[e], w[e, None] * m[src[e]])
    return GlobalLaplacian(raw, m)


def raw_row_sums(lap):
    """Row sums of ``L0`` as diagonal minus the off-diagonal magnitude sum."""
    raw = lap.raw.tocoo()
    n = raw.shape[0]
    diag = raw.diagonal()
    off = raw.row != raw.col
    order = np.lexsort((raw.col[off], raw.row[off]))
    neg = np.zeros(n)
    np.add.at(neg, raw.row[off][order], -raw.data[off][order])
    return diag - neg


def verify_diffusion(lap, u, h, tolerance=1e-12):
    u = np.asarray(u, dtype=np.float64)
    h = np.asarray(h, dtype=np.float64)
    m = lap.expanded
    eff = np.eye(m.shape[0]) - m
    row = float(np.max(np.abs(eff.sum(axis=1)), initial=0.0))
    op = float(np.max(np.abs((h - u) + eff @ u), initial=0.0))
    raw = float(np.max(np.abs(raw_row_sums(lap)), initial=0.0))
    return DiffusionReport(row, op, raw, tolerance)
