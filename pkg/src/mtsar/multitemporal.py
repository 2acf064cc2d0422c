"""Multi-temporal despeckling strategies and super-image machinery.

Two complementary pipelines operate on a co-registered stack:

* Quegan filtering: temporal averaging of change-compensated images,
  ``out_t = (1/T) * sum_k vhat_t * w_k / vhat_k``, where the per-date
  reflectivity pre-estimates vhat_k rescale every other date into date
  t's radiometry before averaging. Temporal correlation is neglected.
* RABASAR: form the super-image s (temporal arithmetic mean), denoise
  the ratio tau_t = w_t / s with a single-image despeckler, and multiply
  back: ``out_t = tau_hat_t * s``. The ratio is far more spatially
  stationary than w_t, which is what makes it easy to denoise.

All divisions are guarded by an epsilon floor on the denominator; all
temporal accumulations run in float64 and results are float32.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from mtsar.core import Image, Stack, ValidationError, require_same_shape, validate_stack
from mtsar.despeckle import DespecklerSpec, despeckle, with_looks

# Absolute floor used when the denominator image has (near-)zero mean; keeps
# every ratio finite in float32 without affecting physical data.
_TINY_FLOOR = 1e-30


@dataclass(frozen=True)
class EpsilonPolicy:
    """Division guard: denominators are floored at eps_rel * mean(denominator)."""

    eps_rel: float = 1e-6

    def __post_init__(self) -> None:
        if not self.eps_rel > 0:
            raise ValidationError(f"eps_rel must be positive, got {self.eps_rel}")

    def floor_for(self, denominator: np.ndarray) -> float:
        mean = float(np.mean(denominator, dtype=np.float64))
        return max(self.eps_rel * mean, _TINY_FLOOR)


def super_image(stack: Stack) -> Image:
    """Temporal arithmetic mean of the stack (float64 accumulation)."""
    validate_stack(stack)
    acc = np.zeros(stack.images[0].shape, dtype=np.float64)
    for img in stack.images:
        acc += img.pixels
    return Image((acc / len(stack)).astype(np.float32))


class SuperImageAccumulator:
    """Running temporal sum enabling O(1)-per-date super-image updates.

    The sum is held in float64; ``current()`` matches the batch
    super-image of the absorbed dates to within accumulation rounding.
    The accumulator is single-writer: updates mutate it in place.
    """

    def __init__(self, width: int, height: int) -> None:
        if width < 1 or height < 1:
            raise ValidationError(f"dimensions must be >= 1, got {width}x{height}")
        self._sum = np.zeros((height, width), dtype=np.float64)
        self._count = 0

    @classmethod
    def from_state(cls, running_sum: Image, count: int) -> "SuperImageAccumulator":
        """Rebuild from persisted state (float32 sum snapshot + date count)."""
        if count < 0:
            raise ValidationError(f"count must be >= 0, got {count}")
        acc = cls(running_sum.width, running_sum.height)
        acc._sum += running_sum.pixels
        acc._count = int(count)
        return acc

    @property
    def count(self) -> int:
        return self._count

    @property
    def width(self) -> int:
        return self._sum.shape[1]

    @property
    def height(self) -> int:
        return self._sum.shape[0]

    def update(self, image: Image) -> "SuperImageAccumulator":
        """Absorb one new date; returns self for chaining."""
        if image.shape != self._sum.shape:
            raise ValidationError(
                f"image shape {image.shape} != accumulator shape {self._sum.shape}"
            )
        self._sum += image.pixels
        self._count += 1
        return self

    def running_sum(self) -> Image:
        """Float32 snapshot of the running sum (the persisted representation)."""
        return Image(self._sum.astype(np.float32))

    def current(self) -> Image:
        """Super-image over all absorbed dates; requires count >= 1."""
        if self._count < 1:
            raise ValidationError("accumulator holds no dates yet")
        return Image((self._sum / self._count).astype(np.float32))


def ratio_image(w_t: Image, s: Image, policy: EpsilonPolicy = EpsilonPolicy()) -> Image:
    """tau_t = w_t / max(s, floor): date-t deviations from the super-image."""
    require_same_shape(w_t, s)
    floor = np.float32(policy.floor_for(s.pixels))
    return Image(w_t.pixels / np.maximum(s.pixels, floor))


def quegan(
    stack: Stack,
    preestimates: Sequence[Image],
    t: int,
    policy: EpsilonPolicy = EpsilonPolicy(),
) -> Image:
    """Change-compensated temporal average for date t.

    ``out = vhat_t * (1/T) * sum_k w_k / max(vhat_k, floor_k)`` with the
    floor taken per pre-estimate image. The better the pre-estimates, the
    closer the output gets to averaging T independent looks of date t.
    """
    validate_stack(stack)
    T = len(stack)
    if not 0 <= t < T:
        raise ValidationError(f"date index {t} outside [0, {T})")
    if len(preestimates) != T:
        raise ValidationError(f"{len(preestimates)} pre-estimates for {T} dates")
    shape = stack.images[0].shape
    for v in preestimates:
        if v.shape != shape:
            raise ValidationError(f"pre-estimate shape {v.shape} != stack shape {shape}")
    acc = np.zeros(shape, dtype=np.float64)
    for w_k, v_k in zip(stack.images, preestimates):
        floor = policy.floor_for(v_k.pixels)
        acc += w_k.pixels / np.maximum(v_k.pixels.astype(np.float64), floor)
    out = preestimates[t].pixels.astype(np.float64) * acc / T
    if float(out.min()) < 0.0:
        raise ValidationError("negative output; inputs must be non-negative")
    return Image(out.astype(np.float32))


def preestimate_stack(stack: Stack, spec: DespecklerSpec) -> tuple[Image, ...]:
    """Despeckle every date once; reusable across all output dates."""
    validate_stack(stack)
    spec = with_looks(spec, stack.looks)
    return tuple(despeckle(w_k, spec) for w_k in stack.images)


def quegan_with_despeckler(
    stack: Stack,
    spec: DespecklerSpec,
    t: int,
    policy: EpsilonPolicy = EpsilonPolicy(),
) -> Image:
    """Quegan filtering with pre-estimates from the given despeckler.

    When processing many output dates of the same stack, compute
    :func:`preestimate_stack` once and call :func:`quegan` per date
    instead; this convenience wrapper re-estimates every call.
    """
    return quegan(stack, preestimate_stack(stack, spec), t, policy)


def rabasar(
    w_t: Image,
    s: Image,
    ratio_denoiser: DespecklerSpec,
    policy: EpsilonPolicy = EpsilonPolicy(),
) -> Image:
    """Ratio-based estimate: denoise w_t / s, multiply back by s."""
    tau = ratio_image(w_t, s, policy)
    tau_hat = despeckle(tau, ratio_denoiser)
    out = tau_hat.pixels * s.pixels
    if float(out.min()) < 0.0:
        raise ValidationError("negative output; inputs must be non-negative")
    return Image(out)


def rabasar_denoised_super(
    stack: Stack,
    t: int,
    super_denoiser: DespecklerSpec,
    ratio_denoiser: DespecklerSpec,
    policy: EpsilonPolicy = EpsilonPolicy(),
) -> Image:
    """RABASAR against a denoised super-image.

    Useful for short series where the super-image itself still carries
    residual fluctuations; for long static series it changes little.
    """
    validate_stack(stack)
    if not 0 <= t < len(stack):
        raise ValidationError(f"date index {t} outside [0, {len(stack)})")
    s_hat = despeckle(super_image(stack), with_looks(super_denoiser, stack.looks))
    return rabasar(stack.images[t], s_hat, with_looks(ratio_denoiser, stack.looks), policy)
