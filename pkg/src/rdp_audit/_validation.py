"""Input validation shared by the estimator classes."""
from __future__ import annotations

import numpy as np
from sklearn.utils import check_array

from .mechanisms import SampleSet


def check_samples(X, discrete: bool | str = "auto", alphabet_size: int | None = None,
                  name: str = "X") -> SampleSet:
    """Turn a 1-d array (or a single-column 2-d array) into a :class:`SampleSet`.

    With ``discrete="auto"`` integer arrays are treated as atoms of a finite
    alphabet and everything else as real-valued outputs.
    """
    if isinstance(X, SampleSet):
        return X
    arr = check_array(X, ensure_2d=False, dtype=None, input_name=name)
    if arr.ndim == 2:
        if arr.shape[1] != 1:
            raise ValueError(f"{name} must hold scalar outputs, got shape {arr.shape}")
        arr = arr[:, 0]
    if discrete == "auto":
        discrete = np.issubdtype(arr.dtype, np.integer) or arr.dtype == bool
    if discrete:
        arr = arr.astype(np.int64)
        size = alphabet_size if alphabet_size is not None else int(arr.max()) + 1
        return SampleSet("discrete", arr, alphabet_size=size)
    arr = arr.astype(float)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return SampleSet("continuous", arr)


def check_pair(X, y, discrete="auto", alphabet_size=None) -> tuple[SampleSet, SampleSet]:
    """Validate two samples of equal size and kind over one alphabet."""
    a = check_samples(X, discrete, alphabet_size, "X")
    b = check_samples(y, discrete, alphabet_size, "y")
    if a.kind != b.kind:
        raise ValueError("X and y must both be discrete or both continuous")
    if a.n != b.n:
        raise ValueError(f"X and y must have the same length, got {a.n} and {b.n}")
    if a.kind == "discrete" and a.alphabet_size != b.alphabet_size:
        size = max(a.alphabet_size, b.alphabet_size)
        a = SampleSet("discrete", a.values, size)
        b = SampleSet("discrete", b.values, size)
    return a, b
