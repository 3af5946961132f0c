"""Backend selection for the sequential sampling kernel.

The Cython extension is used when it was compiled at install time; otherwise
the numpy fallback takes over.  Both are importable side by side so the
benchmark and the equivalence tests can compare them.
"""

from __future__ import annotations

import numpy as np

from . import _fallback

try:
    from . import _kernel  # type: ignore[attr-defined]

    HAVE_COMPILED = True
except ImportError:  # pragma: no cover - depends on build environment
    _kernel = None
    HAVE_COMPILED = False

BACKEND = "compiled" if HAVE_COMPILED else "python"


def chain_paths(cond_cum: np.ndarray, u: np.ndarray, backend: str | None = None) -> np.ndarray:
    """Generate sample paths from pre-drawn uniforms.

    cond_cum: (n, n) row-wise conditional CDF over grid cells, last column 1.
    u: (reps, steps) uniforms in [0, 1); u[:, 0] seeds the initial states.
    """
    cond_cum = np.ascontiguousarray(cond_cum, dtype=np.float64)
    u = np.ascontiguousarray(u, dtype=np.float64)
    if backend is None:
        backend = BACKEND
    out = np.empty_like(u)
    if backend == "compiled":
        if not HAVE_COMPILED:
            raise RuntimeError("compiled kernel requested but not built")
        _kernel.chain_paths_into(cond_cum, u, out)
    elif backend == "python":
        _fallback.chain_paths_into(cond_cum, u, out)
    else:
        raise ValueError(f"unknown backend {backend!r}")
    return out
