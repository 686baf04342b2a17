"""Raster, manifest and PNG input/output.

Raster files ("SRAS"): the 4-byte magic ``SRAS``, little-endian uint32
width and height, then ``width * height`` little-endian float32 values in
row-major order. Nothing else.

Stack manifests are TOML documents::

    domain = "intensity"        # or "amplitude"
    width = 64
    height = 64

    [[entries]]
    date = "2015-01-01"         # ISO-8601 date or date-time, strictly increasing
    path = "img_01.sras"        # relative to the manifest's directory
    enl = 9.0                   # > 0

Every write goes to a temporary file in the target directory that is then
renamed over the destination, so readers never see partial files.
"""
from __future__ import annotations

import datetime as dt
import io
import os
import struct
import sys
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import tomli_w
from PIL import Image

from .errors import FormatError, InputError
from .stack import DOMAINS, ImageStack

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

__all__ = [
    "MAGIC",
    "write_raster",
    "read_raster",
    "write_png",
    "atomic_write",
    "ManifestEntry",
    "StackManifest",
    "read_manifest",
    "write_manifest",
    "load_stack",
    "save_stack",
    "parse_date",
]

MAGIC = b"SRAS"
_HEADER = struct.Struct("<4sII")


def atomic_write(path, data: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_raster(path, raster) -> None:
    """Write a 2-D array as an SRAS float32 raster."""
    arr = np.asarray(raster)
    if arr.ndim != 2:
        raise InputError(f"rasters are 2-D, got shape {arr.shape}")
    height, width = arr.shape
    payload = np.ascontiguousarray(arr, dtype="<f4").tobytes()
    atomic_write(path, _HEADER.pack(MAGIC, width, height) + payload)


def read_raster(path) -> np.ndarray:
    """Read an SRAS raster into a float32 (height, width) array."""
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise FormatError(f"{path}: file too short for a raster header")
    magic, width, height = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}, expected {MAGIC!r}")
    expected = width * height * 4
    if len(data) - _HEADER.size != expected:
        raise FormatError(
            f"{path}: header says {width}x{height} ({expected} bytes) but payload has {len(data) - _HEADER.size} bytes"
        )
    return np.frombuffer(data, dtype="<f4", offset=_HEADER.size).reshape(height, width).astype(np.float32)


def write_png(path, image) -> None:
    """Write an 8-bit RGB (H, W, 3) or grayscale (H, W) PNG, non-interlaced."""
    arr = np.asarray(image)
    if arr.dtype != np.uint8:
        raise InputError("PNG images must be uint8")
    mode = "RGB" if arr.ndim == 3 else "L"
    buf = io.BytesIO()
    Image.fromarray(np.ascontiguousarray(arr), mode=mode).save(buf, format="PNG")
    atomic_write(path, buf.getvalue())


def parse_date(value) -> dt.datetime:
    if isinstance(value, dt.datetime):
        return value
    if isinstance(value, dt.date):
        return dt.datetime(value.year, value.month, value.day)
    try:
        return dt.datetime.fromisoformat(str(value))
    except ValueError:
        raise FormatError(f"not an ISO-8601 date: {value!r}") from None


def _days(date: dt.datetime) -> float:
    if date.tzinfo is not None:
        date = date.astimezone(dt.timezone.utc).replace(tzinfo=None)
    return (date - dt.datetime(1970, 1, 1)).total_seconds() / 86400.0


@dataclass(frozen=True)
class ManifestEntry:
    date: str
    path: str
    enl: float


@dataclass(frozen=True)
class StackManifest:
    entries: tuple
    domain: str = "intensity"
    width: int = 0
    height: int = 0
    root: Path = field(default=Path("."), compare=False)

    def validate(self, check_files: bool = True) -> None:
        if not self.entries:
            raise FormatError("manifest has no entries")
        if self.domain not in DOMAINS:
            raise FormatError(f"domain must be one of {DOMAINS}, got {self.domain!r}")
        if not (self.width > 0 and self.height > 0):
            raise FormatError("manifest width and height must be positive")
        previous = None
        for i, entry in enumerate(self.entries):
            try:
                when = parse_date(entry.date)
            except FormatError as exc:
                raise FormatError(f"entry {i}: {exc}") from None
            if previous is not None and not _days(when) > _days(previous):
                raise FormatError(f"entry {i}: date {entry.date} is not after the previous entry")
            previous = when
            if not (isinstance(entry.enl, (int, float)) and entry.enl > 0):
                raise FormatError(f"entry {i}: enl must be > 0, got {entry.enl!r}")
            if check_files:
                path = self.resolve(entry)
                if not path.is_file():
                    raise FormatError(f"entry {i}: raster {path} not found")
                with open(path, "rb") as fh:
                    head = fh.read(_HEADER.size)
                if len(head) < _HEADER.size or head[:4] != MAGIC:
                    raise FormatError(f"entry {i}: {path} is not an SRAS raster")
                _, width, height = _HEADER.unpack(head)
                if (width, height) != (self.width, self.height):
                    raise FormatError(
                        f"entry {i}: raster is {width}x{height}, manifest says {self.width}x{self.height}"
                    )

    def resolve(self, entry: ManifestEntry) -> Path:
        p = Path(entry.path)
        return p if p.is_absolute() else self.root / p

    @property
    def timestamps(self) -> np.ndarray:
        return np.array([_days(parse_date(e.date)) for e in self.entries])


def read_manifest(path, check_files: bool = True) -> StackManifest:
    """Parse and validate a stack manifest."""
    path = Path(path)
    try:
        doc = tomllib.loads(path.read_text())
    except FileNotFoundError:
        raise
    except (tomllib.TOMLDecodeError, UnicodeDecodeError) as exc:
        raise FormatError(f"{path}: {exc}") from None
    raw_entries = doc.get("entries")
    if not isinstance(raw_entries, list):
        raise FormatError(f"{path}: missing [[entries]] tables")
    entries = []
    for i, item in enumerate(raw_entries):
        missing = {"date", "path", "enl"} - set(item)
        if missing:
            raise FormatError(f"{path}: entry {i} lacks {sorted(missing)}")
        date = item["date"]
        entries.append(ManifestEntry(date=date if isinstance(date, str) else date.isoformat(), path=str(item["path"]), enl=item["enl"]))
    manifest = StackManifest(
        entries=tuple(entries),
        domain=doc.get("domain", "intensity"),
        width=int(doc.get("width", 0)),
        height=int(doc.get("height", 0)),
        root=path.parent,
    )
    manifest.validate(check_files=check_files)
    return manifest


def write_manifest(path, manifest: StackManifest) -> None:
    manifest.validate(check_files=False)
    doc = {
        "domain": manifest.domain,
        "width": manifest.width,
        "height": manifest.height,
        "entries": [{"date": e.date, "path": e.path, "enl": float(e.enl)} for e in manifest.entries],
    }
    atomic_write(path, tomli_w.dumps(doc).encode())


def load_stack(path) -> ImageStack:
    """Read a manifest and all its rasters into an :class:`ImageStack`.

    The stack ENL is the mean of the entry ENLs.
    """
    manifest = read_manifest(path)
    images = np.stack([read_raster(manifest.resolve(e)) for e in manifest.entries]).astype(np.float64)
    return ImageStack(
        images=images,
        enl=float(np.mean([e.enl for e in manifest.entries])),
        timestamps=manifest.timestamps,
        domain=manifest.domain,
        dates=tuple(e.date for e in manifest.entries),
    )


def save_stack(directory, stack: ImageStack, dates, prefix: str = "image", manifest_name: str = "manifest.toml") -> Path:
    """Write every image of ``stack`` plus a manifest; returns the manifest path."""
    directory = Path(directory)
    dates = list(dates)
    if len(dates) != stack.count:
        raise InputError("one date per image is required")
    entries = []
    for i, date in enumerate(dates, start=1):
        name = f"{prefix}_{i:03d}.sras"
        write_raster(directory / name, stack.images[i - 1])
        entries.append(ManifestEntry(date=str(date), path=name, enl=stack.enl))
    height, width = stack.shape
    manifest = StackManifest(entries=tuple(entries), domain=stack.domain, width=width, height=height, root=directory)
    target = directory / manifest_name
    write_manifest(target, manifest)
    return target
