"""Exception hierarchy shared by all solver modules.

Every error carries a ``kind`` string naming the failure so callers (and the
CLI) can react without parsing messages.
"""
from typing import Any, Optional


class ExtprofError(Exception):
    """Base class for all solver errors"""

    default_kind = 'error'

    def __init__(self, message: str, kind: Optional[str] = None, **details: Any):
        super().__init__(message)
        self.kind = kind or self.default_kind
        self.details = details

    def to_dict(self):
        return {'kind': self.kind, 'message': str(self), 'type': type(self).__name__}


class ParameterError(ExtprofError):
    default_kind = 'invalid_argument'


class IntegrationError(ExtprofError):
    """Integrator failure; ``trajectory`` holds the partial path when available"""

    default_kind = 'integration_error'

    def __init__(self, message: str, kind: Optional[str] = None, trajectory=None, **details: Any):
        super().__init__(message, kind, **details)
        self.trajectory = trajectory


class InvariantViolation(ExtprofError):
    default_kind = 'invariant_violation'


class RangeError(ExtprofError):
    default_kind = 'range_mismatch'


class ClassificationError(ExtprofError):
    """Threshold search failure; ``result`` holds the partial bracket when available"""

    default_kind = 'classification_error'

    def __init__(self, message: str, kind: Optional[str] = None, result=None, **details: Any):
        super().__init__(message, kind, **details)
        self.result = result


class ConvergenceError(ExtprofError):
    default_kind = 'not_converged'


class OutputError(ExtprofError):
    default_kind = 'io_error'
