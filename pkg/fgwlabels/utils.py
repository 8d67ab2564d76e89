"""Shared utility functions for FGW pseudo-label generation."""

import json
import logging
import os
import sys
from pathlib import Path
from typing import Any

import numpy as np

LOGGER_NAME = "fgwlabels"

# Environment variable bounding the batch worker pool
THREADS_ENV = "FGW_THREADS"

# Generator streams (one per consumer so adding draws in one place never shifts another)
STREAM_GEOMETRY = 0
STREAM_FEATURES = 1
STREAM_PERMUTATION = 2
STREAM_DENSE_NOISE = 3

logger = logging.getLogger(LOGGER_NAME)


def setup_logging(verbose: bool = False) -> None:
    """Attach the timestamped stderr handler to the package logger (idempotent)."""
    ours = [
        h
        for h in logger.handlers
        if isinstance(h, logging.StreamHandler) and getattr(h, "_fgw", False)
    ]
    if ours:
        # Follow sys.stderr if it was swapped since the last call
        ours[0].stream = sys.stderr
    else:
        handler = logging.StreamHandler(sys.stderr)
        handler.setFormatter(logging.Formatter("[%(asctime)s] %(message)s", datefmt="%H:%M:%S"))
        handler._fgw = True  # type: ignore[attr-defined]
        logger.addHandler(handler)
    logger.setLevel(logging.DEBUG if verbose else logging.INFO)


def log(message: str) -> None:
    """Log with timestamp."""
    logger.info(message)


def debug(message: str) -> None:
    """Log detail only shown with --verbose."""
    logger.debug(message)


def warn(message: str) -> None:
    """Log a warning that also ends up as a flag in diagnostics."""
    logger.warning(f"WARNING: {message}")


def ensure_dir(path: Path) -> None:
    """Ensure a directory exists, creating it if necessary."""
    path.mkdir(parents=True, exist_ok=True)


def dumps_record(data: Any) -> str:
    """Serialize one text record deterministically (sorted keys, compact)."""
    return json.dumps(data, ensure_ascii=False, sort_keys=True, separators=(",", ":"))


def read_json(path: Path) -> Any:
    """Read a JSON file."""
    with open(path, encoding="utf-8") as f:
        return json.load(f)


def write_json(path: Path, data: Any) -> None:
    """Write JSON to file."""
    ensure_dir(path.parent)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(dumps_record(data) + "\n")


def write_jsonl(path: Path, items: list[Any]) -> None:
    """Write JSONL (JSON Lines) to file."""
    ensure_dir(path.parent)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for item in items:
            f.write(dumps_record(item) + "\n")


def read_jsonl(path: Path) -> list[Any]:
    """Read JSONL file."""
    items = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if line:
                items.append(json.loads(line))
    return items


def make_rng(seed: int, stream: int = 0) -> np.random.Generator:
    """Counter-based generator (Philox) keyed by seed, one independent stream per use."""
    if not 0 <= seed < 2**64:
        raise ValueError(f"Seed must be a 64-bit unsigned integer: {seed}")
    key = np.array([seed, stream], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def worker_count() -> int:
    """Batch worker bound from FGW_THREADS, defaulting to the logical CPU count."""
    raw = os.environ.get(THREADS_ENV, "").strip()
    if raw:
        try:
            value = int(raw)
        except ValueError as e:
            raise ValueError(f"{THREADS_ENV} must be a positive integer, got {raw!r}") from e
        if value < 1:
            raise ValueError(f"{THREADS_ENV} must be a positive integer, got {raw!r}")
        return value
    return os.cpu_count() or 1


def format_file_size(size_bytes: int) -> str:
    """Format file size in human-readable format."""
    if size_bytes < 1024:
        return f"{size_bytes} B"
    if size_bytes < 1024 * 1024:
        return f"{size_bytes / 1024:.1f} KB"
    return f"{size_bytes / (1024 * 1024):.2f} MB"
