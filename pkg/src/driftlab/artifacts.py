"""
Reading and writing experiment outputs.

Tables are CSV files with a header row. Floats are written with ``%.17g`` so
that they round-trip exactly and the same run always produces the same
bytes.

Checkpoints store a generator as a length-prefixed JSON header followed by
its parameters as little-endian float64::

    <uint32 little-endian header length> <header JSON, UTF-8> <parameters>

"""

from __future__ import annotations

import csv
import json
import pathlib
import struct
from collections.abc import Iterable, Mapping, Sequence
from typing import Any

import numpy as np

from .drift import DriftField
from .exceptions import SchemaError
from .generator import MlpGenerator
from .targets import ParticleSet


__all__ = [
    "format_value",
    "write_csv",
    "read_csv",
    "write_particles",
    "read_particles",
    "write_drift_field",
    "write_json",
    "save_checkpoint",
    "load_checkpoint",
]


PathLike = str | pathlib.Path

CHECKPOINT_FORMAT = "driftlab-mlp"
CHECKPOINT_VERSION = 1

HEADER_LENGTH = struct.Struct("<I")


def format_value(value: Any) -> str:
    """
    Render a CSV cell.

    Floats are written with 17 significant digits, which round-trips
    exactly; infinities are written as ``inf`` and ``-inf``.

    """
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return "%.17g" % float(value)
    return str(value)


def write_csv(
    path: PathLike,
    columns: Sequence[str],
    rows: Iterable[Sequence[Any]],
) -> pathlib.Path:
    """
    Write a table with a header row.

    Raises:
        SchemaError: If a row doesn't have one value per column.

    """
    path = pathlib.Path(path)
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            if len(row) != len(columns):
                raise SchemaError(
                    str(path), f"expected {len(columns)} values, got {len(row)}"
                )
            writer.writerow([format_value(value) for value in row])
    return path


def read_csv(path: PathLike) -> tuple[list[str], np.ndarray[Any, Any]]:
    """
    Read a numeric table written by :func:`write_csv`.

    Returns:
        Column names and an array of shape ``(rows, columns)``.

    Raises:
        SchemaError: If the file is empty, a row is ragged, or a cell isn't
            a number.

    """
    path = pathlib.Path(path)
    with open(path, encoding="utf-8", newline="") as handle:
        reader = csv.reader(handle)
        try:
            columns = next(reader)
        except StopIteration:
            raise SchemaError(str(path), "file is empty") from None
        rows: list[list[float]] = []
        for line, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(columns):
                raise SchemaError(
                    str(path),
                    f"line {line}: expected {len(columns)} values, got {len(row)}",
                )
            try:
                rows.append([float(cell) for cell in row])
            except ValueError as exc:
                raise SchemaError(str(path), f"line {line}: {exc}") from None
    values = np.array(rows, dtype=np.float64).reshape(len(rows), len(columns))
    return columns, values


def _point_columns(dim: int) -> list[str]:
    return ["x", "y"] if dim == 2 else [f"x{i}" for i in range(dim)]


def write_particles(path: PathLike, particles: ParticleSet) -> pathlib.Path:
    """Write one particle per row."""
    return write_csv(path, _point_columns(particles.dim), particles.points.tolist())


def read_particles(path: PathLike) -> ParticleSet:
    _, values = read_csv(path)
    if len(values) == 0:
        raise SchemaError(str(path), "no particles")
    return ParticleSet(values)


def write_drift_field(path: PathLike, field: DriftField) -> pathlib.Path:
    """
    Write probes and drift vectors, one probe per row.

    Columns are the probe coordinates, the vector components prefixed with
    ``v``, and the far-from-support flag.

    """
    dim = field.probe_points.shape[1]
    points = _point_columns(dim)
    columns = points + [f"v{name}" for name in points] + ["far"]
    rows = (
        [*probe, *vector, bool(far)]
        for probe, vector, far in zip(
            field.probe_points.tolist(),
            field.vectors.tolist(),
            field.far_from_support,
        )
    )
    return write_csv(path, columns, rows)


def write_json(path: PathLike, data: Mapping[str, Any]) -> pathlib.Path:
    """Write a JSON document with sorted keys and a trailing newline."""
    path = pathlib.Path(path)
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n", "utf-8")
    return path


def save_checkpoint(
    path: PathLike,
    generator: MlpGenerator,
    *,
    seed: int | None = None,
    step: int = 0,
) -> pathlib.Path:
    """
    Write a generator checkpoint.

    The header records the architecture, the seed and the step.

    """
    path = pathlib.Path(path)
    noise_dim, hidden, out_dim = generator.dims
    header = json.dumps(
        {
            "format": CHECKPOINT_FORMAT,
            "version": CHECKPOINT_VERSION,
            "noise_dim": noise_dim,
            "hidden": hidden,
            "out_dim": out_dim,
            "seed": seed,
            "step": step,
        },
        sort_keys=True,
    ).encode()
    parameters = generator.flatten().astype("<f8").tobytes()
    path.write_bytes(HEADER_LENGTH.pack(len(header)) + header + parameters)
    return path


def load_checkpoint(path: PathLike) -> tuple[MlpGenerator, dict[str, Any]]:
    """
    Read a generator checkpoint written by :func:`save_checkpoint`.

    Returns:
        The generator and the header.

    Raises:
        SchemaError: If the file is truncated or isn't a checkpoint.

    """
    path = pathlib.Path(path)
    data = path.read_bytes()
    if len(data) < HEADER_LENGTH.size:
        raise SchemaError(str(path), "truncated checkpoint")
    (length,) = HEADER_LENGTH.unpack_from(data)
    start = HEADER_LENGTH.size + length
    try:
        header = json.loads(data[HEADER_LENGTH.size : start])
    except ValueError:
        raise SchemaError(str(path), "invalid checkpoint header") from None
    if not isinstance(header, dict) or header.get("format") != CHECKPOINT_FORMAT:
        raise SchemaError(str(path), "not a generator checkpoint")
    shape = MlpGenerator.zeros(header["noise_dim"], header["hidden"], header["out_dim"])
    if len(data) - start != 8 * shape.n_parameters:
        raise SchemaError(
            str(path),
            f"expected {shape.n_parameters} parameters, "
            f"got {(len(data) - start) / 8:g}",
        )
    parameters = np.frombuffer(data, dtype="<f8", offset=start).astype(np.float64)
    return shape.with_flat(parameters), header
