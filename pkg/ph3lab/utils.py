"""
Utility functions for the ph3lab toolkit.

This module provides helpers shared by every lab module: configuration
loading, logging setup, torus-metric arithmetic, seed derivation, worker
pools and the report store that writes JSON/CSV outputs.
"""

import json
import logging
import multiprocessing
import os
from contextlib import contextmanager
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Callable, Dict, Iterator, List, Optional, Sequence, TypeVar

import numpy as np
import pandas as pd

from ph3lab.exceptions import StorageError


# Root handler for every ph3lab logger; the CLI lowers the level with --verbose.
logging.basicConfig(
    level=logging.INFO,
    format="%(asctime)s %(levelname)s [%(name)s] %(message)s",
)
logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")

# Offsets of the 27 lattice translates nearest to the origin.
LATTICE_NEIGHBOURS = np.array(
    [[i, j, k] for i in (-1, 0, 1) for j in (-1, 0, 1) for k in (-1, 0, 1)],
    dtype=float,
)

# One settings section per lab module, plus the runner and the CLI.
CONFIG_SECTIONS = ("cocycle", "leaves", "density", "holonomy", "periodic", "experiments", "cli")
DEFAULT_SETTINGS = Path(__file__).resolve().parent.parent / "config" / "settings.json"


def load_config(config_path: Optional[str] = None) -> Dict[str, Any]:
    """
    Read the lab settings file.

    Top-level keys name lab sections (see CONFIG_SECTIONS). Unknown or
    non-object sections are dropped with a warning; a section that is absent
    leaves its module on the defaults coded next to each `settings.get`.

    Args:
        config_path: Settings file (default: config/settings.json next to the package)

    Returns:
        Mapping of section name to settings; {} if the file is absent or unreadable
    """
    path = Path(config_path) if config_path else DEFAULT_SETTINGS
    try:
        with open(path, "r") as f:
            raw = json.load(f)
    except FileNotFoundError:
        logger.warning(f"No settings file at {path}; all lab sections use built-in defaults")
        return {}
    except json.JSONDecodeError as e:
        logger.error(f"Settings file {path} is not valid JSON: {e}")
        return {}
    if not isinstance(raw, dict):
        logger.error(f"Settings file {path} must hold an object of sections")
        return {}

    config = {}
    for name, values in raw.items():
        if name not in CONFIG_SECTIONS:
            logger.warning(f"Ignoring unknown settings section [{name}] in {path}")
        elif not isinstance(values, dict):
            logger.warning(f"Ignoring settings section [{name}]: expected an object")
        else:
            config[name] = values
    logger.info(f"Loaded settings sections {sorted(config)} from {path}")
    return config


def section(config: Optional[Dict[str, Any]], name: str) -> Dict[str, Any]:
    """Return one config section, tolerating a missing or empty config."""
    return (config or {}).get(name, {}) or {}


def ensure_directory(path: str) -> None:
    """
    Ensure a directory exists, creating it if necessary.

    Args:
        path: Directory path to ensure exists
    """
    Path(path).mkdir(parents=True, exist_ok=True)


def derive_seed(master_seed: int, index: int) -> int:
    """Per-task seed: master seed plus task index, kept inside 64 bits."""
    return (int(master_seed) + int(index)) % (2 ** 64)


def utc_timestamp() -> str:
    """ISO-8601 UTC timestamp for the single timestamp key of a report."""
    return datetime.now(timezone.utc).isoformat()


def wrap_torus(x: np.ndarray) -> np.ndarray:
    """Reduce coordinates to the [0, 1) representative."""
    y = np.mod(x, 1.0)
    # np.mod can return exactly 1.0 for tiny negative inputs
    return np.where(y >= 1.0, 0.0, y)


def torus_displacement(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Shortest displacement from x to y on T^3 among the 27 nearest translates."""
    diff = wrap_torus(np.asarray(y, dtype=float)) - wrap_torus(np.asarray(x, dtype=float))
    candidates = diff[..., None, :] + LATTICE_NEIGHBOURS
    norms = np.linalg.norm(candidates, axis=-1)
    best = np.argmin(norms, axis=-1)
    return np.take_along_axis(candidates, best[..., None, None], axis=-2)[..., 0, :]


def torus_distance(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Torus distance: minimum over the 27 nearest lattice translates."""
    return np.linalg.norm(torus_displacement(x, y), axis=-1)


def normalize_rows(v: np.ndarray) -> np.ndarray:
    """Normalize the last axis of an array of vectors."""
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def canonical_sign(v: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Flip vectors so their first non-negligible component is positive."""
    v = np.array(v, dtype=float, copy=True)
    flat = v.reshape(-1, v.shape[-1])
    for row in flat:
        nonzero = np.flatnonzero(np.abs(row) > tol)
        if nonzero.size and row[nonzero[0]] < 0:
            row *= -1.0
    return flat.reshape(v.shape)


def resolve_jobs(jobs: Optional[int] = None) -> int:
    """
    Resolve the worker count from an explicit value or PH3LAB_JOBS.

    Args:
        jobs: Explicit worker count, or None to consult the environment

    Returns:
        Worker count, at least 1
    """
    if jobs is None:
        raw = os.getenv("PH3LAB_JOBS", "1")
        try:
            jobs = int(raw)
        except ValueError:
            logger.warning(f"Ignoring non-integer PH3LAB_JOBS={raw!r}")
            jobs = 1
    return max(1, int(jobs))


def parallel_map(func: Callable[[T], R], items: Sequence[T], jobs: int = 1) -> List[R]:
    """
    Apply func to items, in order, over a worker pool.

    Args:
        func: Picklable module-level callable
        items: Work items; results keep their order
        jobs: Worker count; 1 runs in-process

    Returns:
        List of results in the order of items
    """
    items = list(items)
    if jobs <= 1 or len(items) <= 1:
        return [func(item) for item in items]
    with multiprocessing.Pool(processes=min(jobs, len(items))) as pool:
        return pool.map(func, items)


def to_jsonable(value: Any) -> Any:
    """Convert numpy scalars/arrays nested in dicts/lists into plain Python."""
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return to_jsonable(value.tolist())
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.bool_):
        return bool(value)
    return value


def dumps_report(payload: Dict[str, Any]) -> str:
    """Byte-stable JSON rendering used for every report file."""
    return json.dumps(to_jsonable(payload), sort_keys=True, indent=2) + "\n"


class ReportStore:
    """Writes report JSON and plot-ready CSV files under one output directory."""

    def __init__(self, out_dir: str):
        """
        Initialize the report store.

        Args:
            out_dir: Directory that receives every file of an experiment

        Raises:
            StorageError: If the directory cannot be created
        """
        self.out_dir = Path(out_dir).resolve()
        try:
            ensure_directory(str(self.out_dir))
        except OSError as e:
            logger.error(f"Failed to create output directory: {e}")
            raise StorageError(f"Output directory creation failed: {e}") from e

    def _target(self, name: str) -> Path:
        """Resolve a file name, refusing anything outside the output directory."""
        target = (self.out_dir / name).resolve()
        if self.out_dir != target.parent and self.out_dir not in target.parents:
            raise StorageError(f"Refusing to write outside {self.out_dir}: {name}")
        return target

    @contextmanager
    def _open(self, name: str) -> Iterator[Any]:
        """
        Context manager for report files.

        Yields:
            Writable text file handle

        Raises:
            StorageError: If the file cannot be written
        """
        target = self._target(name)
        ensure_directory(str(target.parent))
        try:
            with open(target, 'w', newline='') as handle:
                yield handle
        except OSError as e:
            logger.error(f"Error writing {target}: {e}")
            raise StorageError(f"Failed to write {name}: {e}") from e

    def write_json(self, name: str, payload: Dict[str, Any]) -> Path:
        """
        Write a report as sorted, indented JSON.

        Args:
            name: File name relative to the output directory
            payload: JSON-ready dictionary (numpy values are converted)

        Returns:
            Path of the written file
        """
        with self._open(name) as handle:
            handle.write(dumps_report(payload))
        logger.info(f"Wrote report: {name}")
        return self._target(name)

    def write_csv(self, name: str, frame: pd.DataFrame) -> Path:
        """
        Write a plot-ready CSV table.

        Args:
            name: File name relative to the output directory
            frame: Table to write (index is dropped)

        Returns:
            Path of the written file
        """
        with self._open(name) as handle:
            frame.to_csv(handle, index=False, float_format="%.17g")
        logger.info(f"Wrote table: {name} ({len(frame)} rows)")
        return self._target(name)

    def list_files(self) -> List[str]:
        """List files written so far, relative to the output directory."""
        return sorted(
            str(p.relative_to(self.out_dir)) for p in self.out_dir.rglob("*") if p.is_file()
        )
