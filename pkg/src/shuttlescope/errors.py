"""Exception taxonomy for ingest, geometry, physics, and query failures.

Every error that originates in an input file carries the file path and,
where meaningful, the 1-based line number of the offending record.
"""
from __future__ import annotations


class ShuttlescopeError(Exception):
    """Base class for all package errors."""


# ---------------------------------------------------------------------------
# ingest
# ---------------------------------------------------------------------------

class IngestError(ShuttlescopeError):
    def __init__(self, message: str, *, path: str | None = None, line: int | None = None):
        self.path = path
        self.line = line
        loc = ""
        if path is not None:
            loc = f" [{path}" + (f":{line}" if line is not None else "") + "]"
        super().__init__(message + loc)


class UnreadableFile(IngestError):
    pass


class MissingField(IngestError):
    def __init__(self, field: str, **kw):
        self.field = field
        super().__init__(f"missing required field '{field}'", **kw)


class MalformedNumber(IngestError):
    def __init__(self, field: str, value: object = None, **kw):
        self.field = field
        detail = f" (got {value!r})" if value is not None else ""
        super().__init__(f"malformed numeric field '{field}'{detail}", **kw)


class BadPlayerTag(IngestError):
    def __init__(self, value: str, **kw):
        self.value = value
        super().__init__(f"player tag must be 'A' or 'B', got {value!r}", **kw)


class NonMonotoneFrames(IngestError):
    pass


class OverlappingRallies(IngestError):
    def __init__(self, rally_id: int, **kw):
        self.rally_id = rally_id
        super().__init__(f"rally {rally_id} overlaps the previous rally's frame range", **kw)


class DuplicateRallyId(IngestError):
    def __init__(self, rally_id: int, **kw):
        self.rally_id = rally_id
        super().__init__(f"rally id {rally_id} appears more than once", **kw)


class BadShotIndex(IngestError):
    pass


class OrphanShot(IngestError):
    def __init__(self, rally_id: int, shot_index: int, **kw):
        self.rally_id = rally_id
        self.shot_index = shot_index
        super().__init__(
            f"shot {rally_id}/{shot_index} has no rally covering its hit frame", **kw
        )


class EmptyRally(IngestError):
    def __init__(self, rally_id: int, **kw):
        self.rally_id = rally_id
        super().__init__(f"rally {rally_id} contains no shots", **kw)


class AlternationViolation(IngestError):
    def __init__(self, rally_id: int, shot_index: int, **kw):
        self.rally_id = rally_id
        self.shot_index = shot_index
        super().__init__(
            f"shots {shot_index - 1} and {shot_index} of rally {rally_id} share a hitter", **kw
        )


# ---------------------------------------------------------------------------
# court / camera
# ---------------------------------------------------------------------------

class CameraError(ShuttlescopeError):
    pass


class TooFewKeypoints(CameraError):
    def __init__(self, n: int, need: int = 6):
        self.n = n
        super().__init__(f"camera solve needs >= {need} keypoint correspondences, got {n}")


class DegenerateConfiguration(CameraError):
    pass


class BehindCamera(CameraError):
    pass


# ---------------------------------------------------------------------------
# flight
# ---------------------------------------------------------------------------

class FlightError(ShuttlescopeError):
    pass


class NonPhysicalParams(FlightError):
    pass


class TooFewObservations(FlightError):
    def __init__(self, n: int, need: int = 8):
        self.n = n
        super().__init__(f"trajectory fit needs >= {need} visible observations, got {n}")


class NoHitsDetected(FlightError):
    pass


# ---------------------------------------------------------------------------
# scoring / stats
# ---------------------------------------------------------------------------

class ScoringError(ShuttlescopeError):
    pass


class RalliesAfterMatchEnd(ScoringError):
    def __init__(self, rally_id: int):
        self.rally_id = rally_id
        super().__init__(f"rally {rally_id} annotated after the match was already decided")


class NoMidpoint(ScoringError):
    pass


class MissingSideSchedule(ScoringError):
    def __init__(self):
        super().__init__(
            "manifest does not record which player starts on the negative-Y side "
            "('start_negative_y'); cannot canonicalize sides"
        )


# ---------------------------------------------------------------------------
# query
# ---------------------------------------------------------------------------

class QueryError(ShuttlescopeError):
    pass


class InvalidFilter(QueryError):
    pass


class UnknownShot(QueryError):
    def __init__(self, shot_id: str):
        self.shot_id = shot_id
        super().__init__(f"unknown shot id {shot_id!r}")


class UnknownRally(QueryError):
    def __init__(self, rally_id: int):
        self.rally_id = rally_id
        super().__init__(f"unknown rally id {rally_id}")
