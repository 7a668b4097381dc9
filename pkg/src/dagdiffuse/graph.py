"""Directed acyclic graphs, wavefront scheduling and symmetry auditing.

Every propagation direction is one :class:`Dag`.  An edge ``(src, dst)``
means ``src`` is a predecessor feeding ``dst``.  :func:`schedule_groups`
re-orders the vertices into groups such that no two vertices of a group
are linked and every edge goes from an earlier group to a later one, so a
whole group can be updated in one batched step.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    CycleDetected,
    DuplicateEdge,
    EdgeOutOfRange,
    MismatchedVertexCounts,
    ScheduleMismatch,
    SelfLoop,
)


@dataclass(frozen=True, eq=False)
class Dag:
    """One directed graph over vertices ``0..num_vertices-1``.

    ``edges`` is an ``(E, 2)`` integer array of ``(src, dst)`` rows.  The
    edge order given at construction is kept; it is the order weight
    vectors are aligned with.
    """

    num_vertices: int
    edges: np.ndarray
    direction_tag: str = "none"

    def __post_init__(self):
        edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        edges = edges.copy()
        edges.flags.writeable = False
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "num_vertices", int(self.num_vertices))
        if self.num_vertices < 0:
            raise ValueError("num_vertices must be non-negative")
        if any(ch.isspace() for ch in self.direction_tag) or not self.direction_tag:
            raise ValueError(f"invalid direction tag {self.direction_tag!r}")

    @property
    def num_edges(self):
        return len(self.edges)

    @property
    def src(self):
        return self.edges[:, 0]

    @property
    def dst(self):
        return self.edges[:, 1]

    def accumulation_order(self):
        """Edge indices sorted by destination, then ascending source id."""
        return np.lexsort((self.src, self.dst))

    def in_degree(self):
        return np.bincount(self.dst, minlength=self.num_vertices)

    def predecessors(self, vertex):
        return np.sort(self.src[self.dst == vertex])

    def successors(self, vertex):
        return np.sort(self.dst[self.src == vertex])

    def reversed(self, direction_tag):
        return Dag(self.num_vertices, self.edges[:, ::-1], direction_tag)


@dataclass(frozen=True, eq=False)
class GroupSchedule:
    groups: tuple
    group_of: np.ndarray

    @property
    def num_groups(self):
        return len(self.groups)

    @property
    def sizes(self):
        return [len(g) for g in self.groups]

    def check(self, dag):
        """Raise ScheduleMismatch unless this schedule is valid for ``dag``."""
        if len(self.group_of) != dag.num_vertices:
            raise ScheduleMismatch(
                f"schedule covers {len(self.group_of)} vertices, dag has {dag.num_vertices}"
            )
        if dag.num_edges and np.any(self.group_of[dag.src] >= self.group_of[dag.dst]):
            bad = int(np.argmax(self.group_of[dag.src] >= self.group_of[dag.dst]))
            raise ScheduleMismatch(f"edge {tuple(dag.edges[bad])} does not go forward in the schedule")


def _check_edges(dag):
    n = dag.num_vertices
    if dag.num_edges == 0:
        return
    if dag.edges.min() < 0 or dag.edges.max() >= n:
        bad = int(np.argmax((dag.edges < 0).any(1) | (dag.edges >= n).any(1)))
        raise EdgeOutOfRange(f"edge {tuple(dag.edges[bad])} out of range for {n} vertices")
    loops = dag.src == dag.dst
    if loops.any():
        raise SelfLoop(f"self-loop on vertex {int(dag.src[np.argmax(loops)])}")
    key = dag.src * n + dag.dst
    uniq, counts = np.unique(key, return_counts=True)
    if (counts > 1).any():
        k = int(uniq[np.argmax(counts > 1)])
        raise DuplicateEdge(f"duplicate edge ({k // n}, {k % n})")


def _successor_index(dag):
    order = np.argsort(dag.src, kind="stable")
    ptr = np.zeros(dag.num_vertices + 1, dtype=np.int64)
    np.cumsum(np.bincount(dag.src, minlength=dag.num_vertices), out=ptr[1:])
    return ptr, dag.dst[order]


def _gather(ptr, targets, frontier):
    starts = ptr[frontier]
    counts = ptr[frontier + 1] - starts
    total = int(counts.sum())
    if total == 0:
        return targets[:0]
    offsets = np.repeat(starts - np.cumsum(counts) + counts, counts)
    return targets[offsets + np.arange(total)]


def _peel(dag):
    """Iterative source peeling; returns (group_of, unassigned-mask)."""
    n = dag.num_vertices
    ptr, targets = _successor_index(dag)
    indeg = dag.in_degree()
    group_of = np.full(n, -1, dtype=np.int64)
    frontier = np.flatnonzero(indeg == 0)
    level = 0
    while frontier.size:
        group_of[frontier] = level
        nxt = _gather(ptr, targets, frontier)
        np.subtract.at(indeg, nxt, 1)
        frontier = np.unique(nxt[indeg[nxt] == 0])
        level += 1
    return group_of


def validate_acyclic(dag):
    """Raise if ``dag`` has out-of-range endpoints, self-loops, duplicates or a cycle."""
    _check_edges(dag)
    group_of = _peel(dag)
    stuck = group_of < 0
    if stuck.any():
        # Walk predecessors inside the stuck set until a vertex repeats.
        pred = {}
        for s, d in dag.edges:
            if stuck[s] and stuck[d]:
                pred.setdefault(int(d), int(s))
        v = int(np.flatnonzero(stuck)[0])
        seen = set()
        while v not in seen:
            seen.add(v)
            v = pred[v]
        raise CycleDetected(v)


def schedule_groups(dag):
    """Longest-path layering of ``dag`` into wavefront groups."""
    validate_acyclic(dag)
    group_of = _peel(dag)
    num_groups = int(group_of.max()) + 1 if dag.num_vertices else 0
    order = np.argsort(group_of, kind="stable")
    bounds = np.searchsorted(group_of[order], np.arange(num_groups + 1))
    groups = tuple(order[bounds[p]:bounds[p + 1]] for p in range(num_groups))
    for g in groups:
        g.flags.writeable = False
    group_of.flags.writeable = False
    return GroupSchedule(groups, group_of)


@dataclass(frozen=True, eq=False)
class MultiDagSet:
    """DAGs over a common vertex set, stored as opposite-direction pairs.

    ``dags[2*m]`` and ``dags[2*m+1]`` are mirror images of each other.
    """

    dags: tuple
    schedules: tuple = field(default=None)

    def __post_init__(self):
        dags = tuple(self.dags)
        object.__setattr__(self, "dags", dags)
        if dags:
            n = dags[0].num_vertices
            for d in dags[1:]:
                if d.num_vertices != n:
                    raise MismatchedVertexCounts(
                        f"{d.direction_tag} has {d.num_vertices} vertices, expected {n}"
                    )
        if self.schedules is None:
            object.__setattr__(self, "schedules", tuple(schedule_groups(d) for d in dags))
        elif len(self.schedules) != len(dags):
            raise ScheduleMismatch("one schedule per dag required")

    @property
    def num_vertices(self):
        return self.dags[0].num_vertices if self.dags else 0

    @property
    def tags(self):
        return [d.direction_tag for d in self.dags]

    def __len__(self):
        return len(self.dags)

    def __iter__(self):
        return iter(zip(self.dags, self.schedules))

    def undirected_pairs(self):
        """Sorted ``(i, j)`` with ``i < j`` for every edge in any member DAG."""
        if not self.dags:
            return np.zeros((0, 2), dtype=np.int64)
        e = np.concatenate([d.edges for d in self.dags])
        e = np.sort(e, axis=1)
        return np.unique(e, axis=0)


def check_bidirectional_symmetry(dagset):
    """Return the edges whose mirror is missing from the paired DAG.

    Each violation is ``(direction_tag, src, dst)``: the edge exists in the
    DAG tagged ``direction_tag`` but ``(dst, src)`` is absent from its pair.
    """
    dags = dagset.dags if isinstance(dagset, MultiDagSet) else tuple(dagset)
    if len(dags) % 2:
        raise ValueError("direction pairs required: odd number of dags")
    report = []
    for fwd, rev in zip(dags[0::2], dags[1::2]):
        if fwd.num_vertices != rev.num_vertices:
            raise MismatchedVertexCounts(
                f"{fwd.direction_tag}/{rev.direction_tag}: {fwd.num_vertices} vs {rev.num_vertices}"
            )
        a = {tuple(e) for e in fwd.edges.tolist()}
        b = {(d, s) for s, d in rev.edges.tolist()}
        report += [(fwd.direction_tag, s, d) for s, d in sorted(a - b)]
        report += [(rev.direction_tag, d, s) for s, d in sorted(b - a)]
    return report


def longest_path_length(dag):
    """Number of edges on the longest directed path (memoised DFS)."""
    validate_acyclic(dag)
    preds = [[] for _ in range(dag.num_vertices)]
    for s, d in dag.edges.tolist():
        preds[d].append(s)
    depth = [None] * dag.num_vertices
    best = 0
    for v in range(dag.num_vertices):
        stack = [v]
        while stack:
            x = stack[-1]
            pending = [p for p in preds[x] if depth[p] is None]
            if pending:
                stack.extend(pending)
                continue
            stack.pop()
            if depth[x] is None:
                depth[x] = 1 + max((depth[p] for p in preds[x]), default=-1)
        best = max(best, depth[v])
    return best
