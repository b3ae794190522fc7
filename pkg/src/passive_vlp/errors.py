"""Exception types raised by the positioning engine."""


class PositioningError(Exception):
    """Base class for all errors raised by this package."""


class BehindCamera(PositioningError):
    """A point lies on or behind a camera's image plane and cannot be imaged."""

    def __init__(self, message="point is behind the camera", camera_id=None, target_id=None):
        super().__init__(message)
        self.camera_id = camera_id
        self.target_id = target_id


class DegenerateLookAt(PositioningError):
    pass


class TriangulationError(PositioningError):
    """Raised when a target position cannot be fixed from its rays."""

    def __init__(self, message, target_id=None):
        super().__init__(message)
        self.target_id = target_id


class InsufficientRays(TriangulationError):
    pass


class DegenerateGeometry(TriangulationError):
    pass


class TargetFailures(PositioningError):
    """One or more targets failed; ``partial`` holds the ones that succeeded.

    ``failures`` maps target id to the exception raised for that target.
    """

    def __init__(self, failures, partial):
        ids = ", ".join(str(t) for t in sorted(failures))
        super().__init__(f"localization failed for target(s) {ids}")
        self.failures = failures
        self.partial = partial


class SamplingExhausted(PositioningError):
    pass
