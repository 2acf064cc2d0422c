"""Goodman-model speckle simulation and synthetic ground-truth stacks.

Single-look (and multi-look) intensity speckle is multiplicative: an
observed intensity image is w = v * u where v is the underlying
reflectivity and u is unit-mean Gamma noise. For a nominal look count L
the speckle u follows Gamma(shape=L, scale=1/L), so mean(u) = 1 and
var(u) = 1/L.

Reproducibility contract: all randomness flows through numpy's Philox
counter-based generator. A stack's per-date seed is derived from the
master seed via ``SeedSequence(master_seed, spawn_key=(date_index,))``,
and Gamma variates use ``Generator.gamma`` (Marsaglia-Tsang rejection).
Identical inputs therefore produce bit-identical outputs on any platform
running the same numpy implementation.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from mtsar.core import Image, Region, Stack, ValidationError, validate_stack

DEFAULT_LOOKS = 4.0  # GRD-like multi-looked intensity


# ---------------------------------------------------------------------------
# Deterministic generators


def derive_date_seed(master_seed: int, date_index: int) -> int:
    """64-bit per-date seed, a reproducible hash of (master_seed, date_index)."""
    ss = np.random.SeedSequence(master_seed, spawn_key=(date_index,))
    return int(ss.generate_state(1, np.uint64)[0])


def _generator(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))


def sample_speckle(looks: float, width: int, height: int, seed: int) -> Image:
    """i.i.d. L-look intensity speckle: Gamma(L, 1/L), mean 1, variance 1/L."""
    if not (np.isfinite(looks) and looks > 0):
        raise ValidationError(f"looks must be positive, got {looks}")
    if width < 1 or height < 1:
        raise ValidationError(f"dimensions must be >= 1, got {width}x{height}")
    u = _generator(seed).gamma(shape=float(looks), scale=1.0 / float(looks), size=(height, width))
    return Image(u.astype(np.float32))


def corrupt(v: Image, looks: float, seed: int) -> Image:
    """Multiply a strictly positive reflectivity image by sampled speckle."""
    if float(v.pixels.min()) <= 0.0:
        raise ValidationError("reflectivity must be strictly positive everywhere")
    u = sample_speckle(looks, v.width, v.height, seed)
    return Image(v.pixels * u.pixels)


# ---------------------------------------------------------------------------
# Ground-truth scenes


@dataclass(frozen=True)
class ConstantScene:
    level: float


@dataclass(frozen=True)
class EdgeScene:
    """Vertical two-level edge: columns < column get ``left``, the rest ``right``."""

    left: float
    right: float
    column: int


@dataclass(frozen=True)
class PointTargetsScene:
    """Uniform background with isolated bright pixels at (x, y) positions."""

    background: float
    target: float
    positions: tuple[tuple[int, int], ...]


@dataclass(frozen=True)
class LinesScene:
    """Uniform background with full-width bright rows."""

    background: float
    level: float
    rows: tuple[int, ...]


SceneKind = ConstantScene | EdgeScene | PointTargetsScene | LinesScene


def generate_scene(kind: SceneKind, width: int, height: int) -> Image:
    """Deterministic ground-truth reflectivity image for a scene description."""
    if width < 1 or height < 1:
        raise ValidationError(f"dimensions must be >= 1, got {width}x{height}")
    if isinstance(kind, ConstantScene):
        if kind.level <= 0:
            raise ValidationError("scene level must be positive")
        return Image.filled(width, height, kind.level)
    if isinstance(kind, EdgeScene):
        if kind.left <= 0 or kind.right <= 0:
            raise ValidationError("scene levels must be positive")
        if not 0 < kind.column < width:
            raise ValidationError(f"edge column {kind.column} outside (0, {width})")
        arr = np.full((height, width), kind.left, dtype=np.float32)
        arr[:, kind.column :] = kind.right
        return Image(arr)
    if isinstance(kind, PointTargetsScene):
        if kind.background <= 0 or kind.target <= 0:
            raise ValidationError("scene levels must be positive")
        arr = np.full((height, width), kind.background, dtype=np.float32)
        for x, y in kind.positions:
            if not (0 <= x < width and 0 <= y < height):
                raise ValidationError(f"target position ({x}, {y}) out of range")
            arr[y, x] = kind.target
        return Image(arr)
    if isinstance(kind, LinesScene):
        if kind.background <= 0 or kind.level <= 0:
            raise ValidationError("scene levels must be positive")
        arr = np.full((height, width), kind.background, dtype=np.float32)
        for r in kind.rows:
            if not 0 <= r < height:
                raise ValidationError(f"line row {r} out of range")
            arr[r, :] = kind.level
        return Image(arr)
    raise TypeError(f"unknown scene kind: {kind!r}")


# ---------------------------------------------------------------------------
# Scene scripts: truth sequence + noisy stack


@dataclass(frozen=True)
class ChangeEvent:
    """From date ``date_index`` onward, ``region`` takes reflectivity ``value``."""

    date_index: int
    region: Region
    value: float


@dataclass(frozen=True, eq=False)
class SceneScript:
    """Ground-truth reflectivity scene plus cumulative temporal change events."""

    base: Image
    events: tuple[ChangeEvent, ...] = ()
    num_dates: int = 1
    looks: float = DEFAULT_LOOKS

    def __post_init__(self) -> None:
        object.__setattr__(self, "events", tuple(self.events))
        if self.num_dates < 1:
            raise ValidationError(f"num_dates must be >= 1, got {self.num_dates}")
        if not (np.isfinite(self.looks) and self.looks > 0):
            raise ValidationError(f"non-positive looks: {self.looks}")
        if float(self.base.pixels.min()) <= 0.0:
            raise ValidationError("base reflectivity must be strictly positive")
        for e in self.events:
            if not 0 <= e.date_index < self.num_dates:
                raise ValidationError(
                    f"event date index {e.date_index} outside [0, {self.num_dates})"
                )
            if e.value <= 0:
                raise ValidationError("event value must be positive")
            r = e.region
            if (
                r.x0 < 0
                or r.y0 < 0
                or r.x0 + r.w > self.base.width
                or r.y0 + r.h > self.base.height
            ):
                raise ValidationError(f"event region {r} outside scene bounds")


def truth_sequence(script: SceneScript) -> list[Image]:
    """Per-date ground truth v_t: base with all events of index <= t applied."""
    arr = script.base.pixels.copy()
    out: list[Image] = []
    for t in range(script.num_dates):
        for e in script.events:
            if e.date_index == t:
                arr[e.region.slices()] = np.float32(e.value)
        out.append(Image(arr.copy()))
    return out


def generate_stack(script: SceneScript, seed: int) -> tuple[Stack, list[Image]]:
    """Simulate the observed stack and return it with the truth sequence.

    Date t uses the derived seed ``derive_date_seed(seed, t)``, so a
    regenerated stack is bit-identical and any single date can be
    re-simulated in isolation.
    """
    truths = truth_sequence(script)
    images = []
    dates = []
    for t, v_t in enumerate(truths):
        images.append(corrupt(v_t, script.looks, derive_date_seed(seed, t)))
        dates.append(f"t{t:03d}")
    stack = Stack(tuple(images), tuple(dates), script.looks)
    validate_stack(stack)
    return stack, truths
