"""Exception hierarchy. Every error carries a stable string ``code``."""
from __future__ import annotations


class QsoError(Exception):
    code = "QSO_ERROR"

    def __init__(self, message: str = "", **details):
        super().__init__(message or self.code)
        self.details = details


class DimensionMismatch(QsoError):
    code = "DIMENSION_MISMATCH"


class InvalidDimension(QsoError):
    code = "INVALID_DIMENSION"


class NotOnSimplex(QsoError):
    code = "NOT_ON_SIMPLEX"


class OperatorValidationError(QsoError):
    """Raised by :func:`qsolab.operators.validate`.

    ``violations`` is the full list of problems found; ``code`` is the code of
    the first one (negativity is checked before symmetry, symmetry before row
    sums).
    """

    def __init__(self, violations: list[dict]):
        self.violations = violations
        self.code = violations[0]["code"]
        super().__init__("; ".join(_describe(v) for v in violations))


def _describe(v: dict) -> str:
    idx = ",".join(str(i) for i in v["index"])
    return f"{v['code']} at ({idx}): {v['value']!r}"


class UnknownName(QsoError):
    code = "UNKNOWN_NAME"


class ParamOutOfRange(QsoError):
    code = "PARAM_OUT_OF_RANGE"


class NotAPartition(QsoError):
    code = "NOT_A_PARTITION"


class NotAFixedPoint(QsoError):
    code = "NOT_A_FIXED_POINT"


class NoConvergence(QsoError):
    code = "NO_CONVERGENCE"


class TrajectoryTooShort(QsoError):
    code = "TRAJECTORY_TOO_SHORT"
