"""Exception hierarchy shared across the package.

Every error carries a stable machine-readable ``code`` so the HTTP gateway
and the CLI can map failures to structured responses / exit statuses.
"""

from __future__ import annotations

from typing import Any


class StreetloomError(Exception):
    """Base class for all domain errors."""

    code = "internal"

    def __init__(self, message: str = "", detail: Any = None):
        super().__init__(message or self.__class__.__name__)
        self.message = message or self.__class__.__name__
        self.detail = detail


class DegenerateInput(StreetloomError):
    code = "degenerate_input"


class EmptyTrajectory(StreetloomError):
    code = "empty_trajectory"


class ManifestParseError(StreetloomError):
    code = "parse_error"


class DuplicateRecord(StreetloomError):
    code = "duplicate_record"


class DegeneratePath(StreetloomError):
    code = "degenerate_path"


class NoOverlap(StreetloomError):
    code = "no_overlap"


class BadAspect(StreetloomError):
    code = "bad_aspect"


class PitchOutOfRange(StreetloomError):
    code = "pitch_out_of_range"


class IncompatibleDims(StreetloomError):
    code = "incompatible_dims"


class ConditionTooShort(StreetloomError):
    code = "condition_too_short"


class NoCoverage(StreetloomError):
    """Planner failure: part of the requested path has no usable capture.

    ``detail`` holds ``{"uncovered": [[s_lo, s_hi], ...]}`` in meters of
    arc length along the requested path.
    """

    code = "no_coverage"


class BackendFailure(StreetloomError):
    code = "backend_failure"


class FrameCountMismatch(StreetloomError):
    code = "frame_count_mismatch"


class SessionStateError(StreetloomError):
    code = "session_state"


class DimMismatch(StreetloomError):
    code = "dim_mismatch"


class AllMasked(StreetloomError):
    code = "all_masked"


class TooSmall(StreetloomError):
    code = "too_small"


class SqrtNonConvergence(StreetloomError):
    code = "sqrt_non_convergence"
