"""Exception types shared across the boxopt package."""


class BoxoptError(Exception):
    """Base class for all boxopt domain errors."""


class ConfigurationError(BoxoptError):
    """Invalid configuration: bad grid bounds, impossible fixed boxes, bad ranges."""


class ParseError(BoxoptError):
    """Malformed input record; carries the 1-based line number when known."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class FormatError(BoxoptError):
    """Corrupt or truncated binary file; names the byte offset of the problem."""

    def __init__(self, message: str, offset: int | None = None):
        self.offset = offset
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)


class SizeError(BoxoptError):
    """Instance exceeds a size guard for the requested method."""


class InfeasibleSubproblemError(BoxoptError):
    """A packing unit has no available fitting box; names the unit."""

    def __init__(self, unit: int):
        self.unit = unit
        super().__init__(
            f"packing unit {unit} fits no available box; the largest box must "
            "always be selected and units must be filtered at ingestion"
        )


class NonMonotoneOracleError(BoxoptError):
    """The fit oracle violated monotonicity; names the witnessing pair of points."""

    def __init__(self, fit_point, unfit_point):
        self.fit_point = tuple(fit_point)
        self.unfit_point = tuple(unfit_point)
        super().__init__(
            f"oracle is not monotone: {self.fit_point} fits but the larger "
            f"point {self.unfit_point} does not"
        )


class BackendError(BoxoptError):
    """External solver failed; carries the captured process output."""

    def __init__(self, message: str, output: str = ""):
        self.output = output
        if output:
            message = f"{message}\n--- solver output ---\n{output}"
        super().__init__(message)
