"""Custom exceptions for robust-linear-bandits."""

from typing import Any, Dict, Optional


class ConfigurationError(Exception):
    """Exception raised for invalid parameters or experiment configuration."""

    def __init__(
        self,
        message: str,
        field: Optional[str] = None,
        value: Optional[Any] = None,
        line: Optional[int] = None,
    ) -> None:
        self.message = message
        self.field = field
        self.value = value
        self.line = line
        super().__init__(message)

    def __str__(self) -> str:
        location = f"line {self.line}: " if self.line is not None else ""
        if self.field and self.value is not None:
            return f"Configuration error: {location}{self.message} (field: {self.field}, value: {self.value})"
        elif self.field:
            return f"Configuration error: {location}{self.message} (field: {self.field})"
        return f"Configuration error: {location}{self.message}"


class NumericalError(Exception):
    """Exception raised when a numerical input is rejected (non-finite values, bad weights)."""

    def __init__(self, message: str, operation: Optional[str] = None) -> None:
        self.message = message
        self.operation = operation
        super().__init__(message)

    def __str__(self) -> str:
        if self.operation:
            return f"Numerical error in {self.operation}: {self.message}"
        return f"Numerical error: {self.message}"


class ContractError(Exception):
    """Exception raised when a caller breaks an operation's contract."""

    def __init__(self, message: str, component: Optional[str] = None) -> None:
        self.message = message
        self.component = component
        super().__init__(message)

    def __str__(self) -> str:
        if self.component:
            return f"Contract violation ({self.component}): {self.message}"
        return f"Contract violation: {self.message}"


class EpisodeError(Exception):
    """Exception raised when a simulation episode aborts."""

    def __init__(
        self,
        message: str,
        seed: Optional[int] = None,
        round_index: Optional[int] = None,
        policy: Optional[str] = None,
    ) -> None:
        self.message = message
        self.seed = seed
        self.round_index = round_index
        self.policy = policy
        super().__init__(message)

    def __reduce__(self) -> Any:
        return (EpisodeError, (self.message, self.seed, self.round_index, self.policy))

    def __str__(self) -> str:
        parts = []
        if self.policy:
            parts.append(f"policy: {self.policy}")
        if self.seed is not None:
            parts.append(f"seed: {self.seed}")
        if self.round_index is not None:
            parts.append(f"round: {self.round_index}")
        if parts:
            return f"Episode failed: {self.message} ({', '.join(parts)})"
        return f"Episode failed: {self.message}"

    def to_dict(self) -> Dict[str, Any]:
        """Structured failure report."""
        cause = self.__cause__
        return {
            "error_type": "EpisodeError",
            "message": self.message,
            "policy": self.policy,
            "seed": self.seed,
            "round_index": self.round_index,
            "cause_type": type(cause).__name__ if cause is not None else None,
            "cause": str(cause) if cause is not None else None,
        }


class FileSystemError(Exception):
    """Exception raised for file system operations."""

    def __init__(self, message: str, path: Optional[str] = None, operation: Optional[str] = None) -> None:
        self.message = message
        self.path = path
        self.operation = operation
        super().__init__(message)

    def __str__(self) -> str:
        details = []
        if self.operation:
            details.append(f"operation: {self.operation}")
        if self.path:
            details.append(f"path: {self.path}")
        if details:
            return f"File system error: {self.message} ({', '.join(details)})"
        return f"File system error: {self.message}"
