import sys
from pathlib import Path

import numpy as np
import pytest

from mtsar.core import Image, Stack

REPO_ROOT = Path(__file__).resolve().parents[1]
ECHO_PLUGIN = REPO_ROOT / "scripts" / "echo_denoiser.py"


@pytest.fixture
def echo_command() -> tuple[str, str]:
    return (sys.executable, str(ECHO_PLUGIN))


@pytest.fixture
def write_plugin(tmp_path):
    """Create a throwaway plugin script and return its command tuple."""

    def _write(body: str, name: str = "plugin.py") -> tuple[str, str]:
        path = tmp_path / name
        path.write_text(body)
        return (sys.executable, str(path))

    return _write


def make_stack(arrays, looks: float = 4.0) -> Stack:
    images = tuple(Image(np.asarray(a, dtype=np.float32)) for a in arrays)
    dates = tuple(f"d{i:03d}" for i in range(len(images)))
    return Stack(images, dates, looks)
