"""Exception types raised across the package."""


class DagDiffuseError(ValueError):
    """Base class for all package errors."""


class EdgeOutOfRange(DagDiffuseError):
    pass


class SelfLoop(DagDiffuseError):
    pass


class DuplicateEdge(DagDiffuseError):
    pass


class CycleDetected(DagDiffuseError):
    def __init__(self, vertex):
        super().__init__(f"directed cycle through vertex {vertex}")
        self.vertex = vertex


class ScheduleMismatch(DagDiffuseError):
    pass


class MismatchedVertexCounts(DagDiffuseError):
    pass


class DegenerateCentroids(DagDiffuseError):
    pass


class DegenerateNeighborhood(DagDiffuseError):
    pass


class MissingNormals(DagDiffuseError):
    pass


class MissingColors(DagDiffuseError):
    pass


class ShapeMismatch(DagDiffuseError):
    pass


class VertexOutOfRange(DagDiffuseError):
    pass


class ChannelMismatch(DagDiffuseError):
    pass


class DivergedLoss(DagDiffuseError):
    def __init__(self, step, value):
        super().__init__(f"non-finite loss {value!r} at step {step}")
        self.step = step
        self.value = value
