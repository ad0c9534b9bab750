from __future__ import annotations

from pathlib import Path
from typing import Any

import numpy as np
import yaml

DATA_PATH = Path(__file__).parent / "data"


def read_fixture_file(path: str | Path) -> Any:
    """Load a YAML fixture (a single document)."""
    text = Path(path).read_text(encoding="utf-8")
    return yaml.safe_load(text)


def readonly(value: Any, dtype: Any = None) -> np.ndarray:
    """Return a private, non-writeable copy of ``value`` as an array."""
    array = np.array(value, dtype=dtype, copy=True)
    array.setflags(write=False)
    return array


def vec(matrix: np.ndarray) -> np.ndarray:
    """Column-major vectorisation (stacks the columns of ``matrix``)."""
    return np.asarray(matrix).reshape(-1, order="F")


def unvec(vector: np.ndarray, shape: tuple[int, int]) -> np.ndarray:
    """Inverse of :func:`vec`."""
    return np.asarray(vector).reshape(shape, order="F")
