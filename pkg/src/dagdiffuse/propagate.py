"""Linear propagation on DAGs and its reverse-mode gradient.

Each vertex is updated as

    h(i) = (1 - sum_k g_ik) u(i) + sum_k g_ik h(k)

over its predecessors ``k``.  :func:`propagate_sequential` visits vertices
one at a time; :func:`propagate_grouped` updates a whole wavefront group per
step, using the edge list directly instead of dense inter-group blocks.
Both accumulate incoming contributions in ascending source id, so their
results agree bitwise.
"""

import numpy as np

from .errors import ShapeMismatch
from .graph import validate_acyclic

FUSION_MODES = ("max", "mean")


def _check_inputs(dag, w, u):
    w = np.asarray(w, dtype=np.float64)
    u = np.asarray(u, dtype=np.float64)
    if w.shape != (dag.num_edges,):
        raise ShapeMismatch(f"weights {w.shape} do not match {dag.num_edges} edges")
    if u.ndim != 2 or u.shape[0] != dag.num_vertices:
        raise ShapeMismatch(f"unary {u.shape} does not match {dag.num_vertices} vertices")
    return w, u


def compute_degree(dag, w):
    """Signed sum of incoming weights per vertex."""
    w = np.asarray(w, dtype=np.float64)
    order = dag.accumulation_order()
    d = np.zeros(dag.num_vertices)
    np.add.at(d, dag.dst[order], w[order])
    return d


def propagate_sequential(dag, w, u):
    """Reference propagation, one vertex at a time in topological order."""
    w, u = _check_inputs(dag, w, u)
    validate_acyclic(dag)
    n = dag.num_vertices
    incoming = [[] for _ in range(n)]
    for e in dag.accumulation_order().tolist():
        incoming[dag.dst[e]].append(e)
    d = compute_degree(dag, w)
    indeg = [len(x) for x in incoming]
    succ = [[] for _ in range(n)]
    for s, t in dag.edges.tolist():
        succ[s].append(t)
    ready = [v for v in range(n) if indeg[v] == 0]
    h = np.empty_like(u)
    while ready:
        i = ready.pop()
        acc = (1.0 - d[i]) * u[i]
        for e in incoming[i]:
            acc = acc + w[e] * h[dag.src[e]]
        h[i] = acc
        for t in succ[i]:
            indeg[t] -= 1
            if indeg[t] == 0:
                ready.append(t)
    return h


def group_edge_plan(dag, schedule):
    """Per group, the indices of edges entering it, sorted by (dst, src)."""
    schedule.check(dag)
    src, dst = dag.src, dag.dst
    gdst = schedule.group_of[dst]
    order = np.lexsort((src, dst, gdst))
    bounds = np.searchsorted(gdst[order], np.arange(schedule.num_groups + 1))
    return [order[bounds[p]:bounds[p + 1]] for p in range(schedule.num_groups)]


def propagate_grouped(schedule, dag, w, u, on_step=None, plan=None):
    """Wavefront propagation: exactly ``schedule.num_groups`` batched steps.

    ``on_step(p, h)`` is called after group ``p`` is written, with the
    partially filled output; use it to count steps or dump snapshots.
    """
    w, u = _check_inputs(dag, w, u)
    if plan is None:
        plan = group_edge_plan(dag, schedule)
    d = compute_degree(dag, w)
    src, dst = dag.src, dag.dst
    h = np.zeros_like(u)
    for p, verts in enumerate(schedule.groups):
        h[verts] = (1.0 - d[verts])[:, None] * u[verts]
        e = plan[p]
        if e.size:
            np.add.at(h, dst[e], w[e, None] * h[src[e]])
        if on_step is not None:
            on_step(p, h)
    return h


def propagate_backward(schedule, dag, w, u, h, grad_h, plan=None):
    """Adjoint of :func:`propagate_grouped`.

    Returns ``(grad_u, grad_w)`` given the gradient of a scalar loss with
    respect to the output ``h``.
    """
    w, u = _check_inputs(dag, w, u)
    grad_h = np.asarray(grad_h, dtype=np.float64)
    if grad_h.shape != u.shape or np.shape(h) != u.shape:
        raise ShapeMismatch("h and grad_h must match the unary shape")
    if plan is None:
        plan = group_edge_plan(dag, schedule)
    d = compute_degree(dag, w)
    src, dst = dag.src, dag.dst
    adj = grad_h.copy()
    grad_u = np.zeros_like(u)
    grad_w = np.zeros(dag.num_edges)
    for p in range(schedule.num_groups - 1, -1, -1):
        verts = schedule.groups[p]
        grad_u[verts] = (1.0 - d[verts])[:, None] * adj[verts]
        e = plan[p]
        if e.size:
            a_dst = adj[dst[e]]
            grad_w[e] = np.sum(a_dst * (h[src[e]] - u[dst[e]]), axis=1)
            np.add.at(adj, src[e], w[e, None] * a_dst)
    return grad_u, grad_w


def fuse_directions(hs, mode="max"):
    """Element-wise max or mean over per-direction results."""
    if not hs:
        raise ValueError("nothing to fuse")
    shape = np.shape(hs[0])
    if any(np.shape(h) != shape for h in hs):
        raise ShapeMismatch("direction results differ in shape")
    stack = np.stack([np.asarray(h, dtype=np.float64) for h in hs])
    if mode == "max":
        return stack.max(axis=0)
    if mode == "mean":
        return stack.mean(axis=0)
    raise ValueError(f"unknown fusion mode {mode!r}")


def propagate_all(dagset, weights, u, fuse="max", sweeps=1, on_step=None):
    """Propagate along every direction of ``dagset`` and fuse the results.

    With ``sweeps > 1`` the fused output is fed back as the next unary.
    ``on_step(sweep, direction_index, group, h)`` observes every batched step.
    """
    if len(weights) != len(dagset):
        raise ShapeMismatch("one weight vector per dag required")
    if sweeps < 1:
        raise ValueError("sweeps must be >= 1")
    h = np.asarray(u, dtype=np.float64)
    for s in range(sweeps):
        outs = []
        for k, ((dag, sched), w) in enumerate(zip(dagset, weights)):
            cb = None
            if on_step is not None:
                cb = lambda p, hh, s=s, k=k: on_step(s, k, p, hh)
            outs.append(propagate_grouped(sched, dag, w, h, on_step=cb))
        h = fuse_directions(outs, fuse)
    return h
