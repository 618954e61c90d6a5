"""Checkpoint files and CSV outputs.

Checkpoint format (version 1): a text header of "key: value" lines
terminated by one blank line, then the parameter vector, Adam first
moment, and Adam second moment as consecutive little-endian float64
arrays.  Writes are atomic (temp file + rename).
"""

from __future__ import annotations

import csv
import os
import sys
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .functional import LossBreakdown
from .network import Architecture, NetworkParams, param_count

__all__ = ["Checkpoint", "CheckpointError", "save_checkpoint", "load_checkpoint",
           "write_csv", "append_csv_row", "read_csv_rows"]

FORMAT_VERSION = 1


class CheckpointError(ValueError):
    """Corrupt, truncated, or unsupported checkpoint file."""


@dataclass(frozen=True)
class Checkpoint:
    arch: Architecture
    seed: int
    iteration: int
    params: np.ndarray
    adam_m: np.ndarray
    adam_v: np.ndarray
    loss: LossBreakdown
    format_version: int = FORMAT_VERSION

    def __post_init__(self):
        n = param_count(self.arch)
        for name in ("params", "adam_m", "adam_v"):
            a = np.ascontiguousarray(getattr(self, name), dtype=np.float64)
            if a.shape != (n,):
                raise CheckpointError(f"{name} has shape {a.shape}, expected ({n},)")
            object.__setattr__(self, name, a)

    @property
    def network(self) -> NetworkParams:
        return NetworkParams(self.arch, self.params)


def _to_le(a: np.ndarray) -> bytes:
    return a.astype("<f8", copy=False).tobytes()


def save_checkpoint(ck: Checkpoint, path) -> None:
    """Write atomically; rejects non-finite values."""
    for name in ("params", "adam_m", "adam_v"):
        if not np.all(np.isfinite(getattr(ck, name))):
            raise CheckpointError(f"refusing to serialize non-finite {name}")
    header = (
        f"version: {ck.format_version}\n"
        f"dims: {ck.arch}\n"
        f"seed: {ck.seed}\n"
        f"iteration: {ck.iteration}\n"
        f"loss_interior: {ck.loss.interior_term:.17g}\n"
        f"loss_boundary: {ck.loss.boundary_term:.17g}\n"
        "\n"
    )
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(header.encode("ascii"))
            fh.write(_to_le(ck.params))
            fh.write(_to_le(ck.adam_m))
            fh.write(_to_le(ck.adam_v))
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_checkpoint(path) -> Checkpoint:
    """Inverse of save_checkpoint; validates version, lengths, finiteness."""
    raw = Path(path).read_bytes()
    sep = raw.find(b"\n\n")
    if sep < 0:
        raise CheckpointError(f"{path}: missing header terminator")
    fields = {}
    for line in raw[:sep].decode("ascii", errors="replace").splitlines():
        if ":" not in line:
            raise CheckpointError(f"{path}: malformed header line {line!r}")
        k, v = line.split(":", 1)
        fields[k.strip()] = v.strip()
    try:
        version = int(fields["version"])
        arch = Architecture.parse(fields["dims"])
        seed = int(fields["seed"])
        iteration = int(fields["iteration"])
        loss = LossBreakdown(float(fields["loss_interior"]), float(fields["loss_boundary"]))
    except (KeyError, ValueError) as e:
        raise CheckpointError(f"{path}: bad header ({e})") from None
    if version != FORMAT_VERSION:
        raise CheckpointError(
            f"{path}: format version {version} not supported (supported: {FORMAT_VERSION})"
        )
    n = param_count(arch)
    body = raw[sep + 2 :]
    if len(body) != 3 * n * 8:
        raise CheckpointError(
            f"{path}: binary section is {len(body)} bytes, expected {3 * n * 8} for dims {arch}"
        )
    flat = np.frombuffer(body, dtype="<f8")
    if sys.byteorder == "big":
        flat = flat.byteswap().view(np.float64)
    flat = flat.astype(np.float64)
    params, m, v = flat[:n], flat[n : 2 * n], flat[2 * n :]
    if not np.all(np.isfinite(flat)):
        raise CheckpointError(f"{path}: non-finite values in binary section")
    return Checkpoint(arch, seed, iteration, params, m, v, loss, format_version=version)


def write_csv(path, header, rows) -> None:
    """CSV with '.' decimals and LF line endings, written atomically."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".")
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            w.writerows(rows)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def append_csv_row(path, header, row) -> None:
    """Append one row, creating the file with its header when absent."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    new = not path.exists()
    with open(path, "a", newline="\n") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if new:
            w.writerow(header)
        w.writerow(row)


def read_csv_rows(path) -> list:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))
