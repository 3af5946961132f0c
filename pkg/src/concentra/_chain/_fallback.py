"""Pure-Python/numpy fallback for the sequential sampling kernel.

Vectorized across replications; the per-step recursion matches the compiled
kernel field by field so both backends produce identical paths from the same
uniforms.
"""

from __future__ import annotations

import numpy as np


def chain_paths_into(cond_cum: np.ndarray, u: np.ndarray, out: np.ndarray) -> None:
    n = cond_cum.shape[0]
    reps, steps = u.shape
    rows = np.arange(reps)
    x = u[:, 0].copy()
    out[:, 0] = x
    for t in range(1, steps):
        cells = np.minimum((x * n).astype(np.int64), n - 1)
        uu = u[:, t]
        rc = cond_cum[cells]
        j = (rc > uu[:, None]).argmax(axis=1)
        prev = np.where(j > 0, rc[rows, np.maximum(j - 1, 0)], 0.0)
        width = rc[rows, j] - prev
        x = (j + (uu - prev) / width) / n
        out[:, t] = x
