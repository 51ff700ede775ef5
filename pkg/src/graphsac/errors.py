"""Exception types shared across the package."""


class GraphsacError(Exception):
    """Base class for all package errors."""


class ParseError(GraphsacError):
    """Malformed input line in an edge list, label file or score file."""

    def __init__(self, message, line_number=None):
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)
        self.line_number = line_number


class BoundsError(GraphsacError):
    """A node or class index falls outside the declared range."""


class IncompleteLabelsError(GraphsacError):
    """Some nodes have no label entry."""

    def __init__(self, missing):
        self.missing = tuple(missing)
        shown = ", ".join(str(m) for m in self.missing[:20])
        if len(self.missing) > 20:
            shown += ", ..."
        super().__init__(f"{len(self.missing)} node(s) without labels: {shown}")


class AllDrawsRejectedError(GraphsacError):
    """Every draw failed the consensus filter; lower the threshold or check the model."""


class EnumerationCapError(GraphsacError):
    """Subset enumeration would exceed the configured cap."""


class ConfigError(GraphsacError):
    """Invalid run configuration."""
