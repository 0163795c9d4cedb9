"""Volume/label/scribble data model, raw+sidecar file I/O, and slice image export.

Conventions used across the whole package:

* volumes are indexed ``(z, y, x)`` with z the axial slice axis,
* gray volumes are float32, normalized to [0, 1] before any propagation,
* label volumes are uint8 over the 4-class taxonomy below, with 255 meaning
  "unlabeled" (plane never annotated / not propagated).

Volumes are treated as immutable after load/normalize; every accessor hands
out copies so concurrent per-slice workers never share mutable state.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

BACKGROUND = 0
BONE = 1
CORRODED_SCREW = 2
SCREW = 3
UNLABELED = 255

FOREGROUND_LABELS = (BONE, CORRODED_SCREW, SCREW)
VALID_LABELS = (BACKGROUND, BONE, CORRODED_SCREW, SCREW)

LABEL_NAMES = {
    BACKGROUND: "background",
    BONE: "bone",
    CORRODED_SCREW: "corroded_screw",
    SCREW: "screw",
}

GRAY_KIND = "grayscale-f32"
LABEL_KIND = "label-u8"

# palette for label slice export: black / red / green / blue, white = unlabeled
LABEL_PALETTE = {
    BACKGROUND: (0, 0, 0),
    BONE: (255, 0, 0),
    CORRODED_SCREW: (0, 255, 0),
    SCREW: (0, 0, 255),
    UNLABELED: (255, 255, 255),
}


@dataclass(frozen=True)
class VolumeMeta:
    """Shape/kind metadata stored in the ``.vmeta`` sidecar."""

    dims: tuple[int, int, int]  # (nz, ny, nx)
    value_kind: str  # GRAY_KIND or LABEL_KIND
    spacing: tuple[float, float, float] | None = None  # per-axis, micrometers

    def __post_init__(self):
        if len(self.dims) != 3 or any(int(d) < 1 for d in self.dims):
            raise ValueError(f"dims must be three positive voxel counts, got {self.dims}")
        if self.value_kind not in (GRAY_KIND, LABEL_KIND):
            raise ValueError(f"unknown value_kind {self.value_kind!r}")
        if self.spacing is not None and len(self.spacing) != 3:
            raise ValueError("spacing must have one entry per axis")

    @property
    def n_voxels(self) -> int:
        nz, ny, nx = self.dims
        return nz * ny * nx


@dataclass(frozen=True)
class GrayVolume:
    """Scalar intensity field, shape (nz, ny, nx), float32."""

    meta: VolumeMeta
    data: np.ndarray

    def __post_init__(self):
        if self.meta.value_kind != GRAY_KIND:
            raise ValueError("GrayVolume requires grayscale metadata")
        if tuple(self.data.shape) != tuple(self.meta.dims):
            raise ValueError(
                f"data shape {self.data.shape} does not match dims {self.meta.dims}"
            )
        if not np.isfinite(self.data).all():
            raise ValueError("gray volume contains non-finite values")

    @classmethod
    def from_array(cls, data, spacing=None) -> "GrayVolume":
        arr = np.asarray(data, dtype=np.float32)
        meta = VolumeMeta(dims=tuple(arr.shape), value_kind=GRAY_KIND, spacing=spacing)
        return cls(meta=meta, data=arr)


@dataclass(frozen=True)
class LabelVolume:
    """Per-voxel label ids, shape (nz, ny, nx), uint8; 255 marks unlabeled voxels."""

    meta: VolumeMeta
    data: np.ndarray

    def __post_init__(self):
        if self.meta.value_kind != LABEL_KIND:
            raise ValueError("LabelVolume requires label metadata")
        if tuple(self.data.shape) != tuple(self.meta.dims):
            raise ValueError(
                f"data shape {self.data.shape} does not match dims {self.meta.dims}"
            )
        bad = ~np.isin(self.data, VALID_LABELS + (UNLABELED,))
        if bad.any():
            raise ValueError(
                f"label volume contains invalid ids: {sorted(np.unique(self.data[bad]).tolist())}"
            )

    @classmethod
    def from_array(cls, data, spacing=None) -> "LabelVolume":
        arr = np.asarray(data, dtype=np.uint8)
        meta = VolumeMeta(dims=tuple(arr.shape), value_kind=LABEL_KIND, spacing=spacing)
        return cls(meta=meta, data=arr)

    def annotated_planes(self) -> list[int]:
        """Indices of planes that carry at least one labeled voxel."""
        has_label = (self.data != UNLABELED).any(axis=(1, 2))
        return [int(z) for z in np.flatnonzero(has_label)]


@dataclass(frozen=True)
class ScribbleSet:
    """Sparse seed annotations: unique (z, y, x, label) records, label in 0..3."""

    records: np.ndarray  # (n, 4) int64 rows z, y, x, label

    def __post_init__(self):
        rec = self.records
        if rec.ndim != 2 or rec.shape[1] != 4:
            raise ValueError("records must be an (n, 4) array of z,y,x,label")
        if len(rec) and not np.isin(rec[:, 3], VALID_LABELS).all():
            raise ValueError("scribble labels must be in {0,1,2,3}")

    @classmethod
    def from_records(cls, records) -> "ScribbleSet":
        """Build from an iterable of (z, y, x, label); de-duplicates exact repeats
        and rejects coordinates annotated with two different labels."""
        rec = np.atleast_2d(np.asarray(list(records), dtype=np.int64))
        if rec.size == 0:
            rec = np.empty((0, 4), dtype=np.int64)
        if rec.shape[1] != 4:
            raise ValueError("each record must be (z, y, x, label)")
        rec = np.unique(rec, axis=0)
        if len(rec) > 1:
            coords = rec[:, :3]
            dup = (coords[1:] == coords[:-1]).all(axis=1)
            if dup.any():
                clash = rec[:-1][dup][0]
                raise ValueError(
                    f"conflicting scribble labels at z={clash[0]} y={clash[1]} x={clash[2]}"
                )
        return cls(records=rec)

    def __len__(self) -> int:
        return len(self.records)

    def planes(self) -> list[int]:
        """Annotated plane indices, ascending."""
        return [int(z) for z in np.unique(self.records[:, 0])]

    def for_plane(self, z: int) -> np.ndarray:
        """(m, 3) rows of y, x, label on plane z."""
        sel = self.records[:, 0] == z
        return self.records[sel][:, 1:]

    def check_bounds(self, dims: tuple[int, int, int]) -> None:
        if len(self.records) == 0:
            return
        lo_ok = (self.records[:, :3] >= 0).all()
        hi_ok = (self.records[:, :3] < np.asarray(dims)).all()
        if not (lo_ok and hi_ok):
            raise ValueError(f"scribble coordinates outside volume bounds {dims}")

    def coverage_by_plane(self, dims: tuple[int, int, int]) -> dict[int, float]:
        """Fraction of plane pixels carrying a scribble, per annotated plane."""
        _, ny, nx = dims
        return {z: len(self.for_plane(z)) / float(ny * nx) for z in self.planes()}


# ---------------------------------------------------------------------------
# raw + sidecar volume files

_KIND_TAGS = {GRAY_KIND: "gray", LABEL_KIND: "label"}
_TAG_KINDS = {v: k for k, v in _KIND_TAGS.items()}
_DTYPES = {GRAY_KIND: np.dtype("<f4"), LABEL_KIND: np.dtype("u1")}


def _base_path(path) -> Path:
    p = Path(path)
    if p.suffix in (".vmeta", ".raw"):
        return p.with_suffix("")
    return p


def save_volume(vol: GrayVolume | LabelVolume, path) -> Path:
    """Write ``<base>.vmeta`` + ``<base>.raw``; returns the sidecar path.

    Payload is little-endian f32 (gray) or u8 (labels) in z-major order, so a
    round trip is bit exact on any platform.
    """
    base = _base_path(path)
    base.parent.mkdir(parents=True, exist_ok=True)
    meta = vol.meta
    nz, ny, nx = meta.dims
    lines = [f"dims={nz},{ny},{nx}", f"kind={_KIND_TAGS[meta.value_kind]}"]
    if meta.spacing is not None:
        sz, sy, sx = meta.spacing
        lines.append(f"spacing={sz!r},{sy!r},{sx!r}")
    sidecar = base.with_suffix(".vmeta")
    sidecar.write_text("\n".join(lines) + "\n", encoding="utf-8")
    payload = np.ascontiguousarray(vol.data, dtype=_DTYPES[meta.value_kind])
    base.with_suffix(".raw").write_bytes(payload.tobytes())
    return sidecar


def _read_sidecar(path: Path) -> VolumeMeta:
    fields = {}
    for raw_line in path.read_text(encoding="utf-8").splitlines():
        line = raw_line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"malformed sidecar line in {path}: {line!r}")
        key, value = line.split("=", 1)
        fields[key.strip()] = value.strip()
    try:
        dims = tuple(int(v) for v in fields["dims"].split(","))
        kind = _TAG_KINDS[fields["kind"]]
    except KeyError as exc:
        raise ValueError(f"sidecar {path} is missing field {exc}") from exc
    spacing = None
    if "spacing" in fields:
        spacing = tuple(float(v) for v in fields["spacing"].split(","))
    return VolumeMeta(dims=dims, value_kind=kind, spacing=spacing)


def load_volume(path) -> GrayVolume | LabelVolume:
    """Load a volume from its sidecar (or base) path; kind comes from the sidecar."""
    base = _base_path(path)
    sidecar = base.with_suffix(".vmeta")
    if not sidecar.exists():
        raise FileNotFoundError(f"sidecar file not found: {sidecar}")
    raw = base.with_suffix(".raw")
    if not raw.exists():
        raise FileNotFoundError(f"raw payload not found: {raw}")
    meta = _read_sidecar(sidecar)
    flat = np.frombuffer(raw.read_bytes(), dtype=_DTYPES[meta.value_kind])
    if flat.size != meta.n_voxels:
        raise ValueError(
            f"{raw}: payload holds {flat.size} elements, dims {meta.dims} "
            f"require {meta.n_voxels}"
        )
    data = flat.reshape(meta.dims).copy()
    if meta.value_kind == GRAY_KIND:
        return GrayVolume(meta=meta, data=data)
    return LabelVolume(meta=meta, data=data)


def load_gray_volume(path) -> GrayVolume:
    vol = load_volume(path)
    if not isinstance(vol, GrayVolume):
        raise ValueError(f"{path}: expected a gray volume, sidecar declares labels")
    return vol


def load_label_volume(path) -> LabelVolume:
    vol = load_volume(path)
    if not isinstance(vol, LabelVolume):
        raise ValueError(f"{path}: expected a label volume, sidecar declares gray")
    return vol


# ---------------------------------------------------------------------------
# scribble files: one `z,y,x,label` per line, '#' comments

def save_scribbles(scribbles: ScribbleSet, path) -> Path:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    lines = ["# scribble records: z,y,x,label"]
    lines += [f"{z},{y},{x},{lab}" for z, y, x, lab in scribbles.records]
    p.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return p


def load_scribbles(path) -> ScribbleSet:
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"scribble file not found: {p}")
    records = []
    for lineno, raw_line in enumerate(p.read_text(encoding="utf-8").splitlines(), 1):
        line = raw_line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split(",")
        if len(parts) != 4:
            raise ValueError(f"{p}:{lineno}: expected z,y,x,label, got {line!r}")
        records.append(tuple(int(v) for v in parts))
    return ScribbleSet.from_records(records)


# ---------------------------------------------------------------------------
# per-slice operations

def normalize_intensities(vol: GrayVolume) -> GrayVolume:
    """Affine rescale of the whole volume to [0, 1]; a constant volume maps to zeros.

    Global (not per-slice) so the edge-weight contrast parameter keeps one
    meaning across all planes of a scan. Idempotent.
    """
    data = vol.data.astype(np.float64)
    lo = float(data.min())
    hi = float(data.max())
    if hi == lo:
        out = np.zeros_like(data, dtype=np.float32)
    else:
        out = ((data - lo) / (hi - lo)).astype(np.float32)
    return GrayVolume(meta=vol.meta, data=out)


def extract_slice(vol: GrayVolume | LabelVolume, z: int) -> np.ndarray:
    """Copy of plane z, shape (ny, nx)."""
    nz = vol.meta.dims[0]
    if not 0 <= z < nz:
        raise IndexError(f"plane index {z} outside [0, {nz})")
    return vol.data[z].copy()


def mask_labels_to_planes(vol: LabelVolume, planes) -> LabelVolume:
    """Copy of a label volume with every plane outside `planes` set to 255.

    Turns a dense synthetic ground truth into the partial reference the real
    annotation pattern produces (labels exist only on annotated slices), so
    Dice evaluation compares exactly the annotated planes.
    """
    nz = vol.meta.dims[0]
    keep = set(int(z) for z in planes)
    bad = [z for z in keep if not 0 <= z < nz]
    if bad:
        raise IndexError(f"plane indices {bad} outside [0, {nz})")
    out = np.full_like(vol.data, UNLABELED)
    for z in sorted(keep):
        out[z] = vol.data[z]
    return LabelVolume(meta=vol.meta, data=out)


def export_slice_image(slice2d: np.ndarray, path) -> Path:
    """Write one slice as a binary netpbm image.

    Float slices (values in [0, 1]) become 8-bit PGM with value*255 rounded
    half-up; integer label slices become PPM using the class palette, with
    unlabeled (255) drawn white.
    """
    arr = np.asarray(slice2d)
    if arr.ndim != 2:
        raise ValueError("expected a 2D slice")
    if np.issubdtype(arr.dtype, np.floating):
        return _write_pgm(arr, path)
    if np.issubdtype(arr.dtype, np.integer):
        return _write_ppm(arr, path)
    raise ValueError(f"cannot export slice of dtype {arr.dtype}")


def _write_pgm(gray: np.ndarray, path) -> Path:
    if gray.min() < 0.0 or gray.max() > 1.0:
        raise ValueError("gray slice must be normalized to [0, 1] before export")
    ny, nx = gray.shape
    # round half-up, not banker's rounding
    pixels = np.floor(gray.astype(np.float64) * 255.0 + 0.5).astype(np.uint8)
    p = Path(path)
    with open(p, "wb") as fh:
        fh.write(f"P5\n{nx} {ny}\n255\n".encode("ascii"))
        fh.write(pixels.tobytes())
    return p


def _write_ppm(labels: np.ndarray, path) -> Path:
    known = np.isin(labels, list(LABEL_PALETTE))
    if not known.all():
        raise ValueError(
            f"label slice contains ids without palette entries: "
            f"{sorted(np.unique(labels[~known]).tolist())}"
        )
    ny, nx = labels.shape
    rgb = np.zeros((ny, nx, 3), dtype=np.uint8)
    for label, color in LABEL_PALETTE.items():
        rgb[labels == label] = color
    p = Path(path)
    with open(p, "wb") as fh:
        fh.write(f"P6\n{nx} {ny}\n255\n".encode("ascii"))
        fh.write(rgb.tobytes())
    return p
