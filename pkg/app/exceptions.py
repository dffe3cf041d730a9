from typing import Optional

from pydantic import BaseModel


class ValidationIssue(BaseModel):
    """One problem found while validating an input file."""
    line: Optional[int] = None
    message: str

    def __str__(self) -> str:
        if self.line is None:
            return self.message
        return f"line {self.line}: {self.message}"


class ToolkitError(Exception):
    """Base class for every error the toolkit raises on purpose."""

    exit_code = 1

    def __init__(self, message: str, issues: Optional[list[ValidationIssue]] = None):
        self.issues = list(issues or [])
        if self.issues:
            details = "; ".join(str(issue) for issue in self.issues)
            message = f"{message}: {details}"
        super().__init__(message)


class ConfigError(ToolkitError):
    """Invalid usage or configuration."""
    exit_code = 2


class DataError(ToolkitError):
    """Input data missing, malformed or failing validation."""
    exit_code = 3


class InvariantViolation(ToolkitError):
    """An internal invariant did not hold."""
    exit_code = 4
