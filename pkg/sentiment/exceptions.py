"""
Error types raised by the pipeline modules.

Management commands map these onto exit codes (see ``EXIT_CODES``).
"""

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_GUARD = 3


class PipelineError(Exception):
    """Base class for every pipeline failure."""
    exit_code = EXIT_DATA


class DataError(PipelineError):
    """Input data is missing, unreadable or violates a precondition."""

    def __init__(self, message, ids=None):
        super().__init__(message)
        self.ids = list(ids or [])


class ArtifactFormatError(DataError):
    """An artifact handed to a stage was produced by an incompatible stage."""

    def __init__(self, message, producer=None):
        if producer:
            message = f"{message} (file was produced by `{producer}`)"
        super().__init__(message)
        self.producer = producer


class SingularSystemError(PipelineError):
    """The closed-form propagation system has no unique solution."""


class GuardHalt(PipelineError):
    """Self-labeling stopped because hold-out performance dropped."""
    exit_code = EXIT_GUARD

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result
