"""Pluggable single-image despeckler: identity, boxcar, or external command.

The external variant shells out to any denoiser that implements the
plugin protocol:

* invocation is ``command <input.sarr> <output.sarr>``, exit 0 on success;
* both files use the .sarr raster format (see :mod:`mtsar.io`);
* the environment variable ``MTSAR_LOOKS`` carries the nominal look count
  of the input as a decimal string when known (plugins may ignore it);
* ``command --caps`` prints ``{"protocol": 1, "name": <string>}`` and
  exits 0, which lets callers validate a configured plugin up front.
"""
from __future__ import annotations

import dataclasses
import json
import os
import shlex
import subprocess
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

from mtsar.core import Image, SarError, ValidationError
from mtsar.io import FormatError, read_image, write_image

PROTOCOL_VERSION = 1
DEFAULT_TIMEOUT = 300.0  # seconds per image; neural plugins can be slow


class PluginError(SarError):
    """An external denoiser failed, hung, or returned malformed output."""


@dataclass(frozen=True)
class IdentitySpec:
    """No-op despeckler: the estimate is the observed image itself."""


@dataclass(frozen=True)
class BoxcarSpec:
    """Local k x k intensity average (spatial multi-looking)."""

    window: int

    def __post_init__(self) -> None:
        if self.window < 1 or self.window % 2 == 0:
            raise ValidationError(f"boxcar window must be odd and >= 1, got {self.window}")


@dataclass(frozen=True)
class ExternalSpec:
    """External denoiser command following the plugin protocol.

    ``looks``, when set, is exported to the plugin as MTSAR_LOOKS.
    """

    command: tuple[str, ...]
    timeout: float = DEFAULT_TIMEOUT
    looks: float | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "command", tuple(str(c) for c in self.command))
        if not self.command:
            raise ValidationError("external despeckler command must be non-empty")
        if not self.timeout > 0:
            raise ValidationError(f"timeout must be positive, got {self.timeout}")


DespecklerSpec = IdentitySpec | BoxcarSpec | ExternalSpec


def parse_despeckler_spec(text: str) -> DespecklerSpec:
    """Parse CLI-style specs: ``identity``, ``boxcar:7``, ``external:CMD``.

    The external command is split with shell quoting rules, e.g.
    ``external:python3 plugins/echo_denoiser.py``.
    """
    head, sep, rest = text.partition(":")
    if head == "identity" and not sep:
        return IdentitySpec()
    if head == "boxcar" and sep:
        try:
            window = int(rest)
        except ValueError:
            raise ValidationError(f"boxcar window must be an integer, got {rest!r}") from None
        return BoxcarSpec(window)
    if head == "external" and sep:
        parts = shlex.split(rest)
        if not parts:
            raise ValidationError("external despeckler command must be non-empty")
        return ExternalSpec(tuple(parts))
    raise ValidationError(f"unknown despeckler spec {text!r}")


def with_looks(spec: DespecklerSpec, looks: float) -> DespecklerSpec:
    """Attach a looks hint to an external spec that does not carry one yet."""
    if isinstance(spec, ExternalSpec) and spec.looks is None:
        return dataclasses.replace(spec, looks=float(looks))
    return spec


def boxcar(image: Image, window: int) -> Image:
    """Mean over the k x k neighborhood, mirror padding at the borders.

    Mirror padding reflects without repeating the edge pixel, which avoids
    the dark-edge bias that zero padding would leak into downstream ratios.
    """
    if window < 1 or window % 2 == 0:
        raise ValidationError(f"boxcar window must be odd and >= 1, got {window}")
    if window == 1:
        return image
    out = ndimage.uniform_filter(image.pixels.astype(np.float64), size=window, mode="mirror")
    return Image(out.astype(np.float32))


def external_invoke(
    image: Image,
    command: tuple[str, ...] | list[str],
    timeout: float = DEFAULT_TIMEOUT,
    looks: float | None = None,
) -> Image:
    """Run one plugin invocation over a temporary .sarr round-trip."""
    cmd = [str(c) for c in command]
    if not cmd:
        raise ValidationError("external despeckler command must be non-empty")
    env = os.environ.copy()
    if looks is not None:
        env["MTSAR_LOOKS"] = str(float(looks))
    with tempfile.TemporaryDirectory(prefix="mtsar-plugin-") as tmp:
        in_path = Path(tmp) / "input.sarr"
        out_path = Path(tmp) / "output.sarr"
        write_image(image, in_path)
        try:
            proc = subprocess.run(
                cmd + [str(in_path), str(out_path)],
                capture_output=True,
                text=True,
                timeout=timeout,
                env=env,
            )
        except subprocess.TimeoutExpired as e:
            raise PluginError(f"denoiser plugin timed out after {timeout:g} s: {cmd!r}") from e
        except OSError as e:
            raise PluginError(f"failed to launch denoiser plugin {cmd!r}: {e}") from e
        if proc.returncode != 0:
            raise PluginError(
                f"denoiser plugin exited with status {proc.returncode}; "
                f"stderr: {proc.stderr.strip()}"
            )
        try:
            out = read_image(out_path)
        except (FormatError, OSError) as e:
            raise PluginError(f"malformed plugin output: {e}") from e
    if out.shape != image.shape:
        raise PluginError(
            f"malformed plugin output: dimensions {out.shape} != input {image.shape}"
        )
    return out


def plugin_caps(command: tuple[str, ...] | list[str], timeout: float = 30.0) -> dict:
    """Run the ``--caps`` handshake and return the parsed capability object."""
    cmd = [str(c) for c in command]
    if not cmd:
        raise ValidationError("external despeckler command must be non-empty")
    try:
        proc = subprocess.run(
            cmd + ["--caps"], capture_output=True, text=True, timeout=timeout
        )
    except (subprocess.TimeoutExpired, OSError) as e:
        raise PluginError(f"capability handshake failed for {cmd!r}: {e}") from e
    if proc.returncode != 0:
        raise PluginError(
            f"capability handshake exited with status {proc.returncode}; "
            f"stderr: {proc.stderr.strip()}"
        )
    try:
        caps = json.loads(proc.stdout)
    except json.JSONDecodeError as e:
        raise PluginError(f"capability handshake printed invalid JSON: {e}") from e
    if not isinstance(caps, dict) or caps.get("protocol") != PROTOCOL_VERSION:
        raise PluginError(f"plugin speaks unsupported protocol: {caps!r}")
    if not isinstance(caps.get("name"), str):
        raise PluginError(f"plugin capabilities missing 'name': {caps!r}")
    return caps


def despeckle(image: Image, spec: DespecklerSpec) -> Image:
    """Single-image reflectivity estimate, dispatched on the spec variant."""
    if isinstance(spec, IdentitySpec):
        return image
    if isinstance(spec, BoxcarSpec):
        return boxcar(image, spec.window)
    if isinstance(spec, ExternalSpec):
        return external_invoke(image, spec.command, spec.timeout, spec.looks)
    raise TypeError(f"unknown despeckler spec: {spec!r}")
