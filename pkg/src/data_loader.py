"""
Reading and writing of configs, result tables and sampled fields.
"""
from __future__ import annotations

import csv
import json
import struct
from pathlib import Path
from typing import Any

import numpy as np

from src.grid import ScalarField, SpaceTimeGrid, VectorField

FIELD_MAGIC = b"CDLF"
FIELD_VERSION = 1
FIELD_HEADER = struct.Struct("<4sHHIIdHH")
FLAG_COMPLEX = 0b01
FLAG_TIME_INDEPENDENT = 0b10


def load_config(filename: str | Path) -> dict[str, Any]:
    """
    Load an experiment config from a JSON file.

    Args:
        filename: Path to the config.

    Returns:
        The parsed JSON object.

    Raises:
        FileNotFoundError: If the file does not exist.
        ValueError: If the file contains invalid JSON; the message names the
            line and column.
        OSError: If the file cannot be read.
    """
    try:
        with open(filename, encoding="utf-8") as f:
            return json.load(f)
    except FileNotFoundError as exc:
        raise FileNotFoundError(f"Config file not found: {filename}") from exc
    except json.JSONDecodeError as exc:
        raise ValueError(
            f"Invalid JSON in config file {filename} at line {exc.lineno}, column {exc.colno}: {exc.msg}"
        ) from exc
    except OSError as exc:
        raise OSError(f"Failed to read config file: {filename}") from exc


def save_json(data: Any, filename: str | Path) -> None:
    """
    Save data as indented JSON with sorted keys.

    Raises:
        OSError: If the file cannot be written.
        TypeError: If the data is not JSON serializable.
    """
    try:
        with open(filename, "w", encoding="utf-8") as f:
            json.dump(data, f, ensure_ascii=False, indent=2, sort_keys=True)
    except OSError as exc:
        raise OSError(f"Failed to write JSON to {filename}") from exc
    except TypeError as exc:
        raise TypeError(f"Data for {filename} is not JSON serializable") from exc


def write_csv(rows: list[dict], columns: list[str], filename: str | Path) -> None:
    """
    Write rows as CSV with a header; keys outside ``columns`` are dropped.

    Raises:
        OSError: If the file cannot be written.
    """
    try:
        with open(filename, "w", newline="", encoding="utf-8") as f:
            writer = csv.DictWriter(f, fieldnames=columns, extrasaction="ignore")
            writer.writeheader()
            writer.writerows(rows)
    except OSError as exc:
        raise OSError(f"Failed to write CSV to {filename}") from exc


def save_field(fld: ScalarField | VectorField, filename: str | Path,
               metadata: dict[str, Any] | None = None) -> Path:
    """
    Save a sampled field as a little-endian binary container.

    The header is magic, version, dim, N, M, T, component count and a flag
    word (bit 0 complex, bit 1 time independent), followed by the values as
    float64 in C order, complex values interleaved. ``metadata`` is written
    to a JSON sidecar with the same stem.

    Args:
        fld: Scalar or vector field.
        filename: Destination of the binary container.
        metadata: Optional provenance for the sidecar.

    Returns:
        Path of the sidecar.

    Raises:
        OSError: If a file cannot be written.
    """
    if isinstance(fld, VectorField):
        values = fld.values
        components = fld.grid.dim
        time_independent = fld.time_independent
    else:
        values = fld.values[None]
        components = 1
        time_independent = fld.is_time_independent()
    grid = fld.grid
    is_complex = np.iscomplexobj(values)
    flags = (FLAG_COMPLEX if is_complex else 0) | (FLAG_TIME_INDEPENDENT if time_independent else 0)
    header = FIELD_HEADER.pack(FIELD_MAGIC, FIELD_VERSION, grid.dim, grid.N, grid.M, grid.T, components, flags)
    payload = np.ascontiguousarray(values, dtype="<c16" if is_complex else "<f8").tobytes()
    path = Path(filename)
    try:
        with open(path, "wb") as f:
            f.write(header)
            f.write(payload)
    except OSError as exc:
        raise OSError(f"Failed to write field to {path}") from exc

    sidecar = path.with_suffix(".json")
    save_json({
        "grid": {"dim": grid.dim, "N": grid.N, "M": grid.M, "T": grid.T},
        "components": components,
        "complex": is_complex,
        "time_independent": time_independent,
        **(metadata or {}),
    }, sidecar)
    return sidecar


def load_field(filename: str | Path) -> ScalarField | VectorField:
    """
    Load a field written by `save_field`.

    Returns:
        A `ScalarField` for one component, a `VectorField` otherwise.

    Raises:
        FileNotFoundError: If the file does not exist.
        ValueError: If the header is malformed or the payload is truncated.
        OSError: If the file cannot be read.
    """
    try:
        with open(filename, "rb") as f:
            raw = f.read()
    except FileNotFoundError as exc:
        raise FileNotFoundError(f"Field file not found: {filename}") from exc
    except OSError as exc:
        raise OSError(f"Failed to read field file: {filename}") from exc

    if len(raw) < FIELD_HEADER.size:
        raise ValueError(f"Field file {filename} is shorter than its header")
    magic, version, dim, N, M, T, components, flags = FIELD_HEADER.unpack_from(raw)
    if magic != FIELD_MAGIC:
        raise ValueError(f"Field file {filename} has bad magic {magic!r}")
    if version != FIELD_VERSION:
        raise ValueError(f"Field file {filename} has unsupported version {version}")
    try:
        grid = SpaceTimeGrid(dim, N, M, T)
    except ValueError as exc:
        raise ValueError(f"Field file {filename} has an invalid grid header") from exc

    dtype = np.dtype("<c16") if flags & FLAG_COMPLEX else np.dtype("<f8")
    shape = (components,) + grid.shape
    expected = int(np.prod(shape)) * dtype.itemsize
    body = raw[FIELD_HEADER.size:]
    if len(body) != expected:
        raise ValueError(f"Field file {filename} holds {len(body)} data bytes, expected {expected}")
    values = np.frombuffer(body, dtype=dtype).reshape(shape)
    if components == 1:
        return ScalarField(grid, values[0])
    return VectorField.from_arrays(grid, list(values), time_independent=bool(flags & FLAG_TIME_INDEPENDENT))
