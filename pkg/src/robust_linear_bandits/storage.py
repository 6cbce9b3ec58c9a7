"""Result directory management for study outputs."""

import logging
import re
from pathlib import Path
from typing import Any, Dict, Union

import pandas as pd
import yaml

from .exceptions import FileSystemError

logger = logging.getLogger(__name__)

INCOMPLETE_MARKER = "INCOMPLETE"
FAILURE_FILE = "failure.yaml"

# 17 significant digits round-trip every float64 exactly.
CSV_FLOAT_FORMAT = "%.17g"

RESERVED_NAMES = {
    "CON", "PRN", "AUX", "NUL",
    "COM1", "COM2", "COM3", "COM4", "COM5", "COM6", "COM7", "COM8", "COM9",
    "LPT1", "LPT2", "LPT3", "LPT4", "LPT5", "LPT6", "LPT7", "LPT8", "LPT9",
}


def safe_component(name: str) -> str:
    """Turn a policy or cell name into a single safe path component."""
    cleaned = re.sub(r"[^A-Za-z0-9._-]+", "_", str(name).strip()).lstrip(".")
    cleaned = cleaned.replace("..", "_")
    if not cleaned:
        return "_"
    if cleaned.upper() in RESERVED_NAMES:
        return f"_{cleaned}"
    return cleaned


class ResultStore:
    """Writes CSV logs, aggregates and YAML metadata below one output directory.

    While a study runs the directory holds an ``INCOMPLETE`` marker. A successful run removes
    it; a failed run keeps it next to a ``failure.yaml`` report.
    """

    def __init__(self, root: Union[str, Path]) -> None:
        """Initialize the store.

        Args:
            root: Output directory (created on ``begin``)

        Raises:
            FileSystemError: If root exists and is not a directory
        """
        if not root or str(root).strip() == "":
            raise FileSystemError("Empty output directory not allowed")
        try:
            self.root = Path(root).resolve()
        except (OSError, ValueError) as e:
            raise FileSystemError(f"Invalid output directory: {e}", str(root), "resolve") from e
        if self.root.exists() and not self.root.is_dir():
            raise FileSystemError("Path exists but is not a directory", str(self.root), "validate")

    def path(self, *parts: str) -> Path:
        """Path below the root built from sanitized components."""
        candidate = self.root.joinpath(*(safe_component(p) for p in parts))
        try:
            candidate.resolve().relative_to(self.root)
        except ValueError as e:
            raise FileSystemError("Path escapes the output directory", str(candidate), "validate") from e
        return candidate

    def begin(self) -> None:
        """Create the directory and mark it incomplete."""
        try:
            self.root.mkdir(parents=True, exist_ok=True)
            (self.root / FAILURE_FILE).unlink(missing_ok=True)
            (self.root / INCOMPLETE_MARKER).write_text("run in progress\n", encoding="utf-8")
        except OSError as e:
            raise FileSystemError(f"Failed to prepare output directory: {e}", str(self.root), "mkdir") from e
        logger.info(f"Writing results to {self.root}")

    def complete(self) -> None:
        try:
            (self.root / INCOMPLETE_MARKER).unlink(missing_ok=True)
        except OSError as e:
            raise FileSystemError(f"Failed to clear the incomplete marker: {e}", str(self.root), "unlink") from e
        logger.info(f"Results complete: {self.root}")

    def fail(self, report: Dict[str, Any]) -> None:
        """Leave the incomplete marker and record why the run stopped."""
        try:
            self.write_yaml(report, FAILURE_FILE)
        except FileSystemError as e:
            logger.warning(f"Could not write failure report: {e}")

    @property
    def is_incomplete(self) -> bool:
        return (self.root / INCOMPLETE_MARKER).exists()

    def write_frame(self, frame: pd.DataFrame, *parts: str) -> Path:
        """Write a table as comma-separated CSV with LF line endings and round-trip floats."""
        path = self.path(*parts)
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            frame.to_csv(path, index=False, float_format=CSV_FLOAT_FORMAT, lineterminator="\n")
        except OSError as e:
            raise FileSystemError(f"Failed to write CSV: {e}", str(path), "write") from e
        logger.debug(f"Wrote {path}")
        return path

    def write_yaml(self, data: Dict[str, Any], *parts: str) -> Path:
        path = self.path(*parts)
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            with open(path, "w", encoding="utf-8", newline="\n") as f:
                yaml.safe_dump(data, f, sort_keys=False)
        except (OSError, yaml.YAMLError) as e:
            raise FileSystemError(f"Failed to write YAML: {e}", str(path), "write") from e
        logger.debug(f"Wrote {path}")
        return path

    def read_yaml(self, *parts: str) -> Any:
        path = self.path(*parts)
        try:
            with open(path, encoding="utf-8") as f:
                return yaml.safe_load(f)
        except (OSError, yaml.YAMLError) as e:
            raise FileSystemError(f"Failed to read YAML: {e}", str(path), "read") from e
