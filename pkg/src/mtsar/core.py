"""Core raster and stack types shared by every other module."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np


class SarError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(SarError, ValueError):
    """An input violated a documented invariant or precondition."""


@dataclass(frozen=True, eq=False)
class Image:
    """Single-band float32 intensity raster, row-major, shape ``(height, width)``.

    Values are linear power (intensity) units and must all be finite. The
    constructor takes ownership of the array: it is cast to C-contiguous
    float32 if needed and then marked read-only, so an ``Image`` can be
    shared across threads without synchronization.
    """

    pixels: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.pixels)
        if arr.ndim != 2:
            raise ValidationError(f"image must be 2-D, got shape {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValidationError(f"image dimensions must be >= 1, got {arr.shape}")
        arr = np.ascontiguousarray(arr, dtype=np.float32)
        if not np.isfinite(arr).all():
            raise ValidationError("image contains non-finite pixels")
        arr.setflags(write=False)
        object.__setattr__(self, "pixels", arr)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.pixels.shape

    @classmethod
    def filled(cls, width: int, height: int, value: float) -> "Image":
        """Constant image of the given size."""
        return cls(np.full((height, width), value, dtype=np.float32))


@dataclass(frozen=True)
class Region:
    """Rectangular pixel window: top-left corner (x0, y0), extent (w, h)."""

    x0: int
    y0: int
    w: int
    h: int

    def __post_init__(self) -> None:
        if self.w < 1 or self.h < 1:
            raise ValidationError(f"region extent must be >= 1, got {self.w}x{self.h}")

    def slices(self) -> tuple[slice, slice]:
        """(row, column) slices selecting this region in a row-major array."""
        return (slice(self.y0, self.y0 + self.h), slice(self.x0, self.x0 + self.w))


@dataclass(frozen=True, eq=False)
class Stack:
    """Ordered, co-registered time series of equally sized images.

    ``dates`` are opaque unique labels (no temporal arithmetic is ever done
    on them); ``looks`` is the nominal look count shared by every image.
    """

    images: tuple[Image, ...]
    dates: tuple[str, ...]
    looks: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "images", tuple(self.images))
        object.__setattr__(self, "dates", tuple(str(d) for d in self.dates))
        object.__setattr__(self, "looks", float(self.looks))

    def __len__(self) -> int:
        return len(self.images)


def validate_stack(stack: Stack) -> None:
    """Raise ValidationError unless all Stack invariants hold."""
    if len(stack.images) == 0:
        raise ValidationError("empty stack")
    if len(stack.dates) != len(stack.images):
        raise ValidationError(
            f"{len(stack.images)} images but {len(stack.dates)} date labels"
        )
    if len(set(stack.dates)) != len(stack.dates):
        raise ValidationError("date labels must be unique")
    if not (np.isfinite(stack.looks) and stack.looks > 0):
        raise ValidationError(f"non-positive looks: {stack.looks}")
    first = stack.images[0].shape
    for date, img in zip(stack.dates, stack.images):
        if img.shape != first:
            raise ValidationError(
                f"dimension mismatch at date {date!r}: {img.shape} != {first}"
            )


def require_same_shape(a: Image, b: Image, what: str = "images") -> None:
    if a.shape != b.shape:
        raise ValidationError(f"{what} differ in size: {a.shape} != {b.shape}")


def crop(image: Image, region: Region) -> Image:
    """Extract a rectangular sub-image; the region must lie inside the image."""
    if (
        region.x0 < 0
        or region.y0 < 0
        or region.x0 + region.w > image.width
        or region.y0 + region.h > image.height
    ):
        raise ValidationError(
            f"region {region} outside image bounds {image.width}x{image.height}"
        )
    return Image(image.pixels[region.slices()].copy())


def region_view(image: Image, region: Region | None) -> np.ndarray:
    """Float64 view of a region (whole image when region is None)."""
    if region is None:
        return image.pixels.astype(np.float64)
    if (
        region.x0 < 0
        or region.y0 < 0
        or region.x0 + region.w > image.width
        or region.y0 + region.h > image.height
    ):
        raise ValidationError(
            f"region {region} outside image bounds {image.width}x{image.height}"
        )
    return image.pixels[region.slices()].astype(np.float64)
