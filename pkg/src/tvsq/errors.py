"""Exception hierarchy shared by all tvsq modules."""


class TVSQError(Exception):
    """Base class for every error raised by this package."""


class ContractError(TVSQError, ValueError):
    """Arguments violate a documented precondition (shapes, lengths, signs)."""


class StabilityError(TVSQError):
    """The feedback polynomial has a root on or outside the unit circle."""

    def __init__(self, rho, message=None):
        self.rho = float(rho)
        super().__init__(message or f"unstable feedback coefficients: root radius {self.rho:.6g} >= 1")


class InversionRangeError(TVSQError, ValueError):
    """A quality value lies outside the open range of the output sigmoid."""

    def __init__(self, value, low, high, where=None):
        self.value = float(value)
        self.interval = (float(low), float(high))
        self.where = where
        loc = f" at {where}" if where is not None else ""
        super().__init__(
            f"cannot invert output nonlinearity{loc}: {self.value:.6g} not in open interval "
            f"({self.interval[0]:.6g}, {self.interval[1]:.6g})"
        )


class DegenerateSubjectError(TVSQError):
    """A subject's offset scores have zero variance, so z-scores are undefined."""

    def __init__(self, subject):
        self.subject = subject
        super().__init__(f"subject {subject} has zero score variance")


class AggregationError(TVSQError):
    """Too few usable scores remain at some (video, second) to form a mean and a spread."""

    def __init__(self, video, t, reason="all subjects are outliers"):
        self.video = video
        self.t = t
        self.reason = reason
        super().__init__(f"{reason} for video {video} at t={t}")


class DatasetFormatError(TVSQError):
    """Malformed trace, panel, manifest, or model file."""

    def __init__(self, message, path=None, line=None, column=None):
        self.path = path
        self.line = line
        self.column = column
        parts = [str(path)] if path is not None else []
        if line is not None:
            parts.append(f"line {line}")
        if column is not None:
            parts.append(f"column {column}")
        prefix = ":".join(parts)
        super().__init__(f"{prefix}: {message}" if prefix else message)
