"""Bit-exact raster serialization, stack manifests, and quicklook export.

The ``.sarr`` raster format
---------------------------
A fixed 16-byte header followed by the raw pixel payload:

====== ====== =====================================
offset size   field
====== ====== =====================================
0      4      magic, ASCII ``SARR``
4      1      version, currently 1
5      1      dtype code, 0 = float32 little-endian
6      2      reserved, written as zeros
8      4      width, u32 little-endian
12     4      height, u32 little-endian
16     4*w*h  row-major float32 pixels
====== ====== =====================================

The format is deliberately minimal so that denoiser plugins in any
language can implement it against this table.

Stack manifests are JSON documents: ``schema_version``, ``looks``,
``entries`` (list of ``{"date", "path"}`` with paths relative to the
manifest), and an optional ``scene_script`` describing how a synthetic
stack was generated.
"""
from __future__ import annotations

import json
import math
import struct
from pathlib import Path
from typing import Sequence

import numpy as np
from PIL import Image as PILImage

from mtsar.core import Image, Region, SarError, Stack, ValidationError, validate_stack
from mtsar.speckle import (
    ChangeEvent,
    ConstantScene,
    EdgeScene,
    LinesScene,
    PointTargetsScene,
    SceneKind,
    SceneScript,
    generate_scene,
)

MAGIC = b"SARR"
VERSION = 1
DTYPE_F32 = 0
_HEADER = struct.Struct("<4sBB2sII")
HEADER_SIZE = _HEADER.size  # 16
MANIFEST_SCHEMA_VERSION = 1

# Display floor keeping the dB conversion total; display-only, no scientific use.
QUICKLOOK_TINY = 1e-20


class FormatError(SarError):
    """A serialized raster or manifest violates its format specification."""


# ---------------------------------------------------------------------------
# .sarr raster I/O


def write_image(image: Image, path: str | Path) -> None:
    """Write an image in the .sarr format (header above, then payload)."""
    header = _HEADER.pack(MAGIC, VERSION, DTYPE_F32, b"\x00\x00", image.width, image.height)
    payload = np.ascontiguousarray(image.pixels, dtype="<f4").tobytes()
    Path(path).write_bytes(header + payload)


def read_image(path: str | Path) -> Image:
    """Read and validate a .sarr file; rejects each corruption class."""
    data = Path(path).read_bytes()
    if len(data) < HEADER_SIZE:
        raise FormatError(f"{path}: truncated header ({len(data)} bytes)")
    magic, version, dtype, _reserved, width, height = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    if dtype != DTYPE_F32:
        raise FormatError(f"{path}: unsupported dtype code {dtype}")
    if width < 1 or height < 1:
        raise FormatError(f"{path}: invalid dimensions {width}x{height}")
    expected = HEADER_SIZE + 4 * width * height
    if len(data) != expected:
        raise FormatError(
            f"{path}: truncated payload (expected {expected} bytes, got {len(data)})"
        )
    arr = np.frombuffer(data, dtype="<f4", offset=HEADER_SIZE).reshape(height, width)
    if not np.isfinite(arr).all():
        raise FormatError(f"{path}: non-finite pixel values")
    return Image(arr.copy())


# ---------------------------------------------------------------------------
# Stack manifests


def write_manifest(
    path: str | Path,
    looks: float,
    entries: Sequence[tuple[str, str]],
    scene_script: dict | None = None,
) -> None:
    """Write a stack manifest; ``entries`` are (date, relative path) pairs."""
    doc: dict = {
        "schema_version": MANIFEST_SCHEMA_VERSION,
        "looks": float(looks),
        "entries": [{"date": d, "path": p} for d, p in entries],
    }
    if scene_script is not None:
        doc["scene_script"] = scene_script
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def read_manifest(path: str | Path) -> Stack | SceneScript:
    """Load a manifest: a Stack when it lists entries, else its SceneScript.

    Referenced images are loaded relative to the manifest location and the
    resulting stack is validated.
    """
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise FormatError(f"{path}: not valid JSON: {e}") from e
    if not isinstance(doc, dict):
        raise FormatError(f"{path}: manifest must be a JSON object")
    if doc.get("schema_version") != MANIFEST_SCHEMA_VERSION:
        raise FormatError(
            f"{path}: unsupported schema_version {doc.get('schema_version')!r}"
        )
    entries = doc.get("entries")
    if entries:
        looks = doc.get("looks")
        if not isinstance(looks, (int, float)):
            raise FormatError(f"{path}: manifest missing numeric 'looks'")
        images = []
        dates = []
        for i, entry in enumerate(entries):
            if not isinstance(entry, dict) or "date" not in entry or "path" not in entry:
                raise FormatError(f"{path}: entry {i} must have 'date' and 'path'")
            dates.append(str(entry["date"]))
            images.append(read_image(path.parent / entry["path"]))
        stack = Stack(tuple(images), tuple(dates), float(looks))
        validate_stack(stack)
        return stack
    if "scene_script" in doc:
        return scene_script_from_dict(doc["scene_script"])
    raise FormatError(f"{path}: manifest has neither entries nor scene_script")


# ---------------------------------------------------------------------------
# Scene-script JSON codec


def scene_kind_to_dict(kind: SceneKind) -> dict:
    if isinstance(kind, ConstantScene):
        return {"kind": "constant", "level": kind.level}
    if isinstance(kind, EdgeScene):
        return {"kind": "edge", "left": kind.left, "right": kind.right, "column": kind.column}
    if isinstance(kind, PointTargetsScene):
        return {
            "kind": "points",
            "background": kind.background,
            "target": kind.target,
            "positions": [[x, y] for x, y in kind.positions],
        }
    if isinstance(kind, LinesScene):
        return {
            "kind": "lines",
            "background": kind.background,
            "level": kind.level,
            "rows": list(kind.rows),
        }
    raise TypeError(f"unknown scene kind: {kind!r}")


def scene_kind_from_dict(d: dict) -> SceneKind:
    try:
        name = d["kind"]
        if name == "constant":
            return ConstantScene(float(d["level"]))
        if name == "edge":
            return EdgeScene(float(d["left"]), float(d["right"]), int(d["column"]))
        if name == "points":
            return PointTargetsScene(
                float(d["background"]),
                float(d["target"]),
                tuple((int(x), int(y)) for x, y in d["positions"]),
            )
        if name == "lines":
            return LinesScene(
                float(d["background"]), float(d["level"]), tuple(int(r) for r in d["rows"])
            )
    except (KeyError, TypeError, ValueError) as e:
        raise FormatError(f"malformed scene description: {e}") from e
    raise FormatError(f"unknown scene kind {name!r}")


def scene_script_to_dict(
    kind: SceneKind,
    width: int,
    height: int,
    num_dates: int,
    looks: float,
    events: Sequence[ChangeEvent] = (),
) -> dict:
    return {
        "scene": scene_kind_to_dict(kind),
        "width": width,
        "height": height,
        "dates": num_dates,
        "looks": float(looks),
        "events": [
            {
                "date_index": e.date_index,
                "region": [e.region.x0, e.region.y0, e.region.w, e.region.h],
                "value": e.value,
            }
            for e in events
        ],
    }


def scene_script_from_dict(d: dict) -> SceneScript:
    try:
        kind = scene_kind_from_dict(d["scene"])
        width, height = int(d["width"]), int(d["height"])
        events = tuple(
            ChangeEvent(
                date_index=int(e["date_index"]),
                region=Region(*(int(v) for v in e["region"])),
                value=float(e["value"]),
            )
            for e in d.get("events", [])
        )
        return SceneScript(
            base=generate_scene(kind, width, height),
            events=events,
            num_dates=int(d["dates"]),
            looks=float(d["looks"]),
        )
    except (KeyError, TypeError, ValueError) as e:
        if isinstance(e, ValidationError):
            raise
        raise FormatError(f"malformed scene_script: {e}") from e


# ---------------------------------------------------------------------------
# Quicklooks


def export_quicklook(
    image: Image, path: str | Path, db_range: tuple[float, float] = (-25.0, 5.0)
) -> None:
    """8-bit grayscale PNG: 10*log10(x) clipped to db_range, mapped to 0..255.

    Rounding is round-half-to-even (numpy rint), so a value exactly midway
    between the range endpoints renders as gray 128.
    """
    lo, hi = float(db_range[0]), float(db_range[1])
    if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
        raise ValidationError(f"invalid dB range ({lo}, {hi})")
    db = 10.0 * np.log10(np.maximum(image.pixels.astype(np.float64), QUICKLOOK_TINY))
    unit = (np.clip(db, lo, hi) - lo) / (hi - lo)
    gray = np.rint(unit * 255.0).astype(np.uint8)
    PILImage.fromarray(gray, mode="L").save(Path(path), format="PNG")
