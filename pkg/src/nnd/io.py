"""File formats: headerless CSV matrices, binary PGM images, run manifests.

CSV is the canonical interchange format (comma-separated decimal rows, no
header, row-major); PGM is read-only for image experiments, intensities
min-max rescaled to [0, 1] on load. Every CLI run writes a JSON manifest
that round-trips losslessly; wall-clock timing is left out unless
explicitly requested so identical seeds give byte-identical outputs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .linalg import as_matrix

PACKAGE_VERSION = "0.1.0"

_CSV_FMT = "%.17g"  # round-trips float64 exactly


def save_matrix_csv(path, x) -> None:
    x = as_matrix(x)
    np.savetxt(path, x, fmt=_CSV_FMT, delimiter=",")


def load_matrix_csv(path):
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"matrix file not found: {path}")
    x = np.loadtxt(path, delimiter=",", ndmin=2)
    return as_matrix(x, str(path))


def save_draws_csv(path, draws) -> None:
    """Concatenated draw file: a leading draw-index column, then the rows.

    Draw i of shape (n, m) becomes n consecutive lines ``i, row...``; this
    single-file layout is the default, per-draw files are a CLI option.
    """
    draws = np.asarray(draws, dtype=float)
    if draws.ndim != 3:
        raise ValueError(f"draws must be (count, rows, cols), got {draws.shape}")
    count, rows, _ = draws.shape
    flat = draws.reshape(count * rows, -1)
    index = np.repeat(np.arange(count, dtype=float), rows)[:, None]
    np.savetxt(path, np.hstack([index, flat]), fmt=_CSV_FMT, delimiter=",")


def load_draws_csv(path):
    """Inverse of :func:`save_draws_csv`."""
    raw = np.loadtxt(path, delimiter=",", ndmin=2)
    idx = raw[:, 0].astype(int)
    body = raw[:, 1:]
    count = idx.max() + 1 if idx.size else 0
    rows = idx.size // max(count, 1)
    return body.reshape(count, rows, body.shape[1])


def save_trace_csv(path, columns: dict) -> None:
    """Named scalar series to CSV with one header line of column names."""
    names = list(columns)
    arrs = [np.asarray(columns[k], dtype=float) for k in names]
    n = len(arrs[0])
    if any(a.size != n for a in arrs):
        raise ValueError("trace columns must share one length")
    body = np.column_stack(arrs)
    np.savetxt(path, body, fmt=_CSV_FMT, delimiter=",",
               header=",".join(names), comments="")


def load_trace_csv(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"trace file not found: {path}")
    with open(path) as fh:
        names = fh.readline().strip().split(",")
    body = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return {name: body[:, j] for j, name in enumerate(names)}


def load_pgm(path):
    """Binary (P5) grayscale image, min-max rescaled to [0, 1].

    Supports 8- and 16-bit samples; a constant image loads as all zeros.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"image file not found: {path}")
    data = path.read_bytes()
    fields, pos = [], 0
    while len(fields) < 4:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos] not in (10, 13):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        fields.append(data[start:pos])
    if fields[0] != b"P5":
        raise ValueError(f"{path}: only binary P5 PGM files are supported")
    width, height, maxval = int(fields[1]), int(fields[2]), int(fields[3])
    pos += 1  # single whitespace byte after maxval
    dtype = np.dtype(">u2") if maxval > 255 else np.uint8
    count = width * height
    pixels = np.frombuffer(data, dtype=dtype, count=count, offset=pos)
    img = pixels.reshape(height, width).astype(float)
    lo, hi = img.min(), img.max()
    if hi > lo:
        img = (img - lo) / (hi - lo)
    else:
        img = np.zeros_like(img)
    return img


def load_matrix(path):
    """Dispatch on extension: .pgm uses the image reader, everything else CSV."""
    path = Path(path)
    if path.suffix.lower() == ".pgm":
        return load_pgm(path)
    return load_matrix_csv(path)


@dataclass
class RunManifest:
    """Reproducibility record written next to every command's outputs."""

    command: str
    seed: int
    config: dict = field(default_factory=dict)
    metrics: dict = field(default_factory=dict)
    timing: float | None = None
    version: str = PACKAGE_VERSION

    def to_json(self) -> str:
        payload = {
            "command": self.command,
            "seed": self.seed,
            "config": self.config,
            "metrics": self.metrics,
            "timing": self.timing,
            "version": self.version,
        }
        return json.dumps(payload, indent=2, sort_keys=True, allow_nan=True)

    def save(self, path) -> None:
        Path(path).write_text(self.to_json() + "\n")

    @classmethod
    def from_json(cls, text: str) -> "RunManifest":
        d = json.loads(text)
        return cls(command=d["command"], seed=d["seed"], config=d["config"],
                   metrics=d["metrics"], timing=d["timing"], version=d["version"])

    @classmethod
    def load(cls, path) -> "RunManifest":
        return cls.from_json(Path(path).read_text())
