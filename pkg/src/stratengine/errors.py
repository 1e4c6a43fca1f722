"""Exception hierarchy shared across the engine."""


class StratEngineError(Exception):
    """Base class for all engine errors."""


class RouteFormatError(StratEngineError):
    """Route JSON/TSV violates the route schema or a tree invariant."""

    def __init__(self, message, path=None):
        if path is not None:
            message = f"{message} at path {path}"
        super().__init__(message)
        self.path = path


class AnnotationFormatError(StratEngineError):
    """Annotation file is malformed or internally inconsistent."""


class UnknownLabelError(StratEngineError):
    """A label was queried that is not in the declared vocabulary."""

    def __init__(self, kind, label):
        super().__init__(f"unknown {kind} label: {label!r}")
        self.kind = kind
        self.label = label


class RuleSyntaxError(StratEngineError):
    """Rule text failed to parse."""

    def __init__(self, message, line=None, column=None):
        if line is not None:
            message = f"{message} (line {line}, column {column})"
        super().__init__(message)
        self.line = line
        self.column = column


class RuleValidationError(StratEngineError):
    """Rule parsed but violates a structural constraint."""


class QueryFormatError(StratEngineError):
    """Structured query JSON violates the query schema."""


class EmbeddingError(StratEngineError):
    """An embedding provider failed; never silently substituted."""


class IndexMismatchError(StratEngineError):
    """A cached artifact was built against different inputs."""


class ClusteringError(StratEngineError):
    """Clustering preconditions violated (k out of range, bad matrix, ...)."""


class BenchmarkError(StratEngineError):
    """Benchmark cases are inconsistent with the corpus."""
