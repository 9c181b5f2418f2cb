from typing import Any, Dict, Optional


class SmoothCruiserError(Exception):
    """Base error. Carries a stable machine-readable code and a CLI exit code."""

    code = "internal_error"
    exit_code = 1

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.message = message
        self.details = details

    def to_payload(self) -> dict:
        from smooth_cruiser.schemas.reports import ErrorInfo, ErrorResponse

        response = ErrorResponse(
            error=ErrorInfo(code=self.code, message=self.message, details=self.details)
        )
        return response.model_dump(mode="json", exclude_none=True)

    def diagnostic(self) -> str:
        return f"error: {self.code}: {self.message}"


class InvalidArgumentError(SmoothCruiserError, ValueError):
    code = "invalid_argument"
    exit_code = 2


class InvalidConfigurationError(InvalidArgumentError):
    code = "invalid_configuration"


class DegenerateRunError(InvalidArgumentError):
    code = "degenerate_run"


class UnsupportedOperationError(SmoothCruiserError, TypeError):
    code = "unsupported_operation"
    exit_code = 2


class InfeasibleAccuracyError(SmoothCruiserError):
    code = "infeasible_accuracy"
    exit_code = 2


class NumericError(SmoothCruiserError, ArithmeticError):
    code = "numeric_error"


class InternalLogicError(SmoothCruiserError, RuntimeError):
    code = "internal_logic"
