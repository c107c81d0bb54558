"""Exception types raised across the package."""


class FloorlocError(Exception):
    """Base class for all package-specific errors."""


class InsufficientFloorPoints(FloorlocError):
    pass


class SensorOutsideScene(FloorlocError):
    pass


class EmptySlab(FloorlocError):
    pass


class EmptyCloud(FloorlocError):
    pass


class NoMissingRegion(FloorlocError):
    pass


class BoundaryNotVisible(FloorlocError):
    pass


class CompletionFailed(FloorlocError):
    def __init__(self, view_index, cause):
        super().__init__(f"completion failed at view {view_index}: {cause}")
        self.view_index = view_index
        self.cause = cause


class ZeroConfidenceGroup(FloorlocError):
    pass


class InvalidSpec(FloorlocError):
    pass


class InvalidConfig(FloorlocError):
    pass


class IoError(FloorlocError):
    """Raised when report emission cannot produce valid output files."""
