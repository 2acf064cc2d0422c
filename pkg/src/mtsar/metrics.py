"""Quantitative evaluation: ENL, error metrics, bias, residual speckle."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from mtsar.core import Image, Region, ValidationError, region_view, require_same_shape
from mtsar.multitemporal import EpsilonPolicy


@dataclass(frozen=True)
class MetricReport:
    """One named measurement, serializable as a JSON-Lines record.

    ``value`` is None when the metric is undefined (zero variance) or
    infinite (zero error); the distinction is carried in ``flag`` so the
    output stays strict JSON.
    """

    name: str
    value: float | None
    region: Region | None = None
    params: dict = field(default_factory=dict)

    def to_json(self) -> str:
        value: float | None
        flag: str | None
        if self.value is None:
            value, flag = None, "undefined"
        elif math.isinf(self.value):
            value, flag = None, "infinite"
        else:
            value, flag = float(self.value), None
        doc = {
            "name": self.name,
            "value": value,
            "flag": flag,
            "region": [self.region.x0, self.region.y0, self.region.w, self.region.h]
            if self.region
            else None,
            "params": {k: str(v) for k, v in self.params.items()},
        }
        return json.dumps(doc, sort_keys=True)


def _region_values(image: Image, region: Region | None, minimum: int = 1) -> np.ndarray:
    vals = region_view(image, region)
    if vals.size < minimum:
        raise ValidationError(f"degenerate region: {vals.size} pixel(s), need >= {minimum}")
    return vals


def enl(image: Image, region: Region | None = None) -> float | None:
    """Equivalent number of looks, mean^2 / variance over the region.

    Uses the unbiased (n-1) sample variance. Returns None (undefined)
    when the region has zero variance, e.g. on constant data.
    """
    vals = _region_values(image, region, minimum=2)
    var = float(vals.var(ddof=1))
    if var == 0.0:
        return None
    mean = float(vals.mean())
    return mean * mean / var


def mse(estimate: Image, truth: Image) -> float:
    """Mean squared error, accumulated in float64."""
    require_same_shape(estimate, truth)
    diff = estimate.pixels.astype(np.float64) - truth.pixels.astype(np.float64)
    return float(np.mean(diff * diff))


def psnr(estimate: Image, truth: Image) -> float:
    """10*log10(peak^2 / mse), peak taken from the ground truth.

    Returns +inf when the estimate matches the truth exactly.
    """
    require_same_shape(estimate, truth)
    peak = float(truth.pixels.max())
    if peak <= 0.0:
        raise ValidationError("psnr undefined: ground truth has no positive peak")
    err = mse(estimate, truth)
    if err == 0.0:
        return math.inf
    return 10.0 * math.log10(peak * peak / err)


def mean_ratio(estimate: Image, truth: Image, region: Region | None = None) -> float:
    """Radiometric bias check: mean(estimate) / mean(truth) over a region."""
    require_same_shape(estimate, truth)
    est = _region_values(estimate, region)
    tru = _region_values(truth, region)
    if float(tru.min()) <= 0.0:
        raise ValidationError("mean_ratio requires strictly positive truth in region")
    return float(est.mean() / tru.mean())


def residual_stats(
    noisy: Image, estimate: Image, policy: EpsilonPolicy = EpsilonPolicy()
) -> tuple[float, float | None]:
    """Method-noise check: mean and ENL of the ratio noisy / estimate.

    If the estimate equals the underlying reflectivity, the ratio is the
    speckle realization itself: mean 1 and ENL close to the look count.
    """
    require_same_shape(noisy, estimate)
    floor = policy.floor_for(estimate.pixels)
    r = noisy.pixels.astype(np.float64) / np.maximum(
        estimate.pixels.astype(np.float64), floor
    )
    mean = float(r.mean())
    var = float(r.var(ddof=1)) if r.size >= 2 else 0.0
    r_enl = None if var == 0.0 else mean * mean / var
    return mean, r_enl


def log_variance(image: Image, region: Region | None = None) -> float:
    """Sample variance of natural-log intensities; a stationarity measure."""
    vals = _region_values(image, region, minimum=2)
    if float(vals.min()) <= 0.0:
        raise ValidationError("log_variance requires strictly positive pixels in region")
    return float(np.log(vals).var(ddof=1))
