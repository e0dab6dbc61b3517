"""
File utility functions.

Readers and writers for the DMX1 binary matrix format (with CSV fallback),
hyperspectral cubes (JSON sidecar plus raw binary, or per-band CSV
directories), label maps and JSON documents.
"""

import json
import logging
import struct
from pathlib import Path
from typing import Any, Dict, Optional, Union

import numpy as np
import pandas as pd

from demix.core.exceptions import InputError
from demix.models.domain import HyperCube

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

DMX_MAGIC = b"DMX1"
DMX_HEADER = struct.Struct("<4sQQ")


def validate_input_file(path: PathLike) -> Path:
    """
    Check that ``path`` names an existing, non-empty file.

    Raises:
        InputError: If the file is missing, a directory or empty
    """
    path = Path(path)
    if not path.exists():
        raise InputError(f"File not found: {path}")
    if not path.is_file():
        raise InputError(f"Not a file: {path}")
    if path.stat().st_size == 0:
        raise InputError(f"Empty files are not allowed: {path}")
    return path


def ensure_directory(path: PathLike) -> Path:
    """Create ``path`` (and parents) if needed."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    return path


def is_csv(path: PathLike) -> bool:
    return Path(path).suffix.lower() in {".csv", ".txt"}


def write_matrix(path: PathLike, matrix: np.ndarray) -> Path:
    """
    Write a matrix as DMX1, or as headerless CSV when the suffix is ``.csv``.

    DMX1 layout: magic ``DMX1``, rows and cols as little-endian uint64, then
    ``rows*cols`` little-endian float64 values in row-major order.
    """
    path = Path(path)
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.ndim != 2:
        raise InputError(f"only matrices can be written, got shape {matrix.shape}")
    ensure_directory(path.parent)

    if is_csv(path):
        pd.DataFrame(matrix).to_csv(path, header=False, index=False, float_format="%.17g")
    else:
        rows, cols = matrix.shape
        with open(path, "wb") as f:
            f.write(DMX_HEADER.pack(DMX_MAGIC, rows, cols))
            f.write(np.ascontiguousarray(matrix, dtype="<f8").tobytes())

    logger.debug(f"Wrote {matrix.shape[0]}x{matrix.shape[1]} matrix to {path}")
    return path


def _read_dmx(path: Path) -> np.ndarray:
    raw = path.read_bytes()
    if len(raw) < DMX_HEADER.size:
        raise InputError(f"Truncated DMX1 header in {path}")
    _, rows, cols = DMX_HEADER.unpack_from(raw)
    expected = DMX_HEADER.size + rows * cols * 8
    if len(raw) != expected:
        raise InputError(
            f"DMX1 file {path} declares {rows}x{cols} but holds {len(raw)} bytes "
            f"(expected {expected})"
        )
    data = np.frombuffer(raw, dtype="<f8", offset=DMX_HEADER.size)
    return data.reshape(rows, cols).astype(np.float64)


def _read_csv(path: Path) -> np.ndarray:
    try:
        frame = pd.read_csv(path, header=None, float_precision="round_trip")
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise InputError(f"Could not parse CSV matrix {path}", detail=str(e)) from e
    try:
        return frame.to_numpy(dtype=np.float64)
    except ValueError as e:
        raise InputError(f"Non-numeric values in CSV matrix {path}", detail=str(e)) from e


def read_matrix(path: PathLike) -> np.ndarray:
    """
    Read a DMX1 or CSV matrix.

    The format is detected from the magic bytes, so CSV files need no
    particular suffix.

    Raises:
        InputError: If the file is missing, malformed or holds non-finite values
    """
    path = validate_input_file(path)
    with open(path, "rb") as f:
        head = f.read(len(DMX_MAGIC))
    matrix = _read_dmx(path) if head == DMX_MAGIC else _read_csv(path)
    if not np.all(np.isfinite(matrix)):
        raise InputError(f"Matrix {path} contains non-finite values")
    logger.info(f"Loaded {matrix.shape[0]}x{matrix.shape[1]} matrix from {path}")
    return matrix


def read_labels(path: PathLike) -> np.ndarray:
    """Read an ``h x w`` CSV label map of nonnegative integers."""
    labels = read_matrix(path)
    if not np.all(labels == np.round(labels)) or np.any(labels < 0):
        raise InputError(f"Label map {path} must hold nonnegative integers")
    return labels.astype(np.int64)


def _band_index(path: Path) -> int:
    digits = "".join(ch for ch in path.stem if ch.isdigit())
    return int(digits) if digits else 0


def read_cube(path: PathLike, labels_path: Optional[PathLike] = None) -> HyperCube:
    """
    Load a hyperspectral cube.

    ``path`` is either a JSON sidecar
    ``{"height", "width", "bands", "dtype": "f64", "order": "band-major"}``
    next to a raw little-endian float64 file (``"data"`` key, default: the
    sidecar's name with ``.bin``), or a directory of per-band ``h x w`` CSV
    files ordered by the number in their names.

    Raises:
        InputError: If the description and the data disagree
    """
    path = Path(path)
    labels = read_labels(labels_path) if labels_path is not None else None

    if path.is_dir():
        band_files = sorted(path.glob("*.csv"), key=_band_index)
        if not band_files:
            raise InputError(f"No band CSV files in {path}")
        planes = [read_matrix(band) for band in band_files]
        if len({plane.shape for plane in planes}) != 1:
            raise InputError(f"Band files in {path} have different shapes")
        voxels = np.stack(planes)
    else:
        path = validate_input_file(path)
        try:
            meta = json.loads(path.read_text())
        except (json.JSONDecodeError, UnicodeDecodeError) as e:
            raise InputError(f"Invalid cube description {path}", detail=str(e)) from e

        try:
            height, width, bands = int(meta["height"]), int(meta["width"]), int(meta["bands"])
        except (KeyError, TypeError, ValueError) as e:
            raise InputError(f"Cube description {path} needs height, width and bands") from e
        if meta.get("dtype", "f64") != "f64" or meta.get("order", "band-major") != "band-major":
            raise InputError("Only f64 band-major cubes are supported")

        data_path = validate_input_file(path.parent / meta.get("data", path.with_suffix(".bin").name))
        data = np.fromfile(data_path, dtype="<f8")
        if data.size != height * width * bands:
            raise InputError(
                f"Cube data {data_path} holds {data.size} values, "
                f"expected {bands}x{height}x{width}"
            )
        voxels = data.reshape(bands, height, width).astype(np.float64)

    cube = HyperCube(voxels=voxels, labels=labels)
    logger.info(
        f"Loaded cube {cube.height}x{cube.width} with {cube.bands} bands from {path}"
    )
    return cube


def write_cube(path: PathLike, cube: HyperCube) -> Path:
    """Write a cube as JSON sidecar plus ``.bin`` data file."""
    path = Path(path)
    ensure_directory(path.parent)
    data_path = path.with_suffix(".bin")
    meta = {
        "height": cube.height,
        "width": cube.width,
        "bands": cube.bands,
        "dtype": "f64",
        "order": "band-major",
        "data": data_path.name,
    }
    path.write_text(json.dumps(meta, indent=2))
    np.ascontiguousarray(cube.voxels, dtype="<f8").tofile(data_path)
    return path


def write_json(path: PathLike, document: Dict[str, Any]) -> Path:
    """Write a JSON document (``Infinity``/``NaN`` allowed)."""
    path = Path(path)
    ensure_directory(path.parent)
    path.write_text(json.dumps(document, indent=2, default=str))
    return path


def write_frame(path: PathLike, frame: pd.DataFrame) -> Path:
    """Write a table as CSV without the index."""
    path = Path(path)
    ensure_directory(path.parent)
    frame.to_csv(path, index=False)
    return path
