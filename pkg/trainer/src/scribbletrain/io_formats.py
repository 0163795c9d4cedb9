"""Readers/writers for the target-engine file formats this trainer consumes.

The engine's external interfaces are plain files: `.vmeta` sidecars with raw
little-endian payloads for volumes, and line-oriented key=value Dice reports.
Only those documented formats are touched here; metric computation itself is
delegated to the engine's CLI.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

UNLABELED = 255


def _base(path) -> Path:
    p = Path(path)
    return p.with_suffix("") if p.suffix in (".vmeta", ".raw") else p


def read_volume(path):
    """Returns (data, kind): float32 (gray) or uint8 (label) array (nz, ny, nx)."""
    base = _base(path)
    fields = {}
    for line in (base.with_suffix(".vmeta")).read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if line and not line.startswith("#") and "=" in line:
            key, value = line.split("=", 1)
            fields[key.strip()] = value.strip()
    dims = tuple(int(v) for v in fields["dims"].split(","))
    kind = fields["kind"]
    dtype = np.dtype("<f4") if kind == "gray" else np.dtype("u1")
    flat = np.frombuffer(base.with_suffix(".raw").read_bytes(), dtype=dtype)
    if flat.size != int(np.prod(dims)):
        raise ValueError(f"{base}: payload size does not match dims {dims}")
    return flat.reshape(dims).copy(), kind


def write_label_volume(data: np.ndarray, path) -> Path:
    """Write a uint8 label volume in the engine's sidecar + raw format."""
    arr = np.ascontiguousarray(data, dtype=np.uint8)
    if arr.ndim != 3:
        raise ValueError("label volume must be (nz, ny, nx)")
    base = _base(path)
    base.parent.mkdir(parents=True, exist_ok=True)
    nz, ny, nx = arr.shape
    base.with_suffix(".vmeta").write_text(
        f"dims={nz},{ny},{nx}\nkind=label\n", encoding="utf-8"
    )
    base.with_suffix(".raw").write_bytes(arr.tobytes())
    return base.with_suffix(".vmeta")


def read_report(path) -> dict[str, float]:
    """Parse the dice_* key=value lines of an engine Dice report."""
    values = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if not line or line.startswith("#") or "=" not in line:
            continue
        key, value = line.split("=", 1)
        if key.startswith("dice_"):
            values[key[len("dice_"):]] = float(value)
    return values


def annotated_planes(labels: np.ndarray) -> list[int]:
    return [int(z) for z in np.flatnonzero((labels != UNLABELED).any(axis=(1, 2)))]
