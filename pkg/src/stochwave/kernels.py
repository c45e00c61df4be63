"""Backend selection for the hot kernels.

The compiled extension is used when importable; set ``STOCHWAVE_BACKEND=python``
to force the numpy/scipy fallback. ``BACKEND`` records the choice.
"""

import os

import numpy as np

from . import _pykernels

_requested = os.environ.get("STOCHWAVE_BACKEND", "auto").lower()
if _requested not in ("auto", "compiled", "python"):
    raise ImportError(f"unknown STOCHWAVE_BACKEND {_requested!r}")

_impl = _pykernels
BACKEND = "python"
if _requested != "python":
    try:
        from . import _ckernels as _impl  # noqa: F811
        BACKEND = "compiled"
    except ImportError:
        if _requested == "compiled":
            raise
        _impl = _pykernels


def _block(x):
    return np.ascontiguousarray(x, dtype=np.float64)


def sym_band_matvec(ab, x):
    return _impl.sym_band_matvec(_block(ab), _block(x))


def band_cholesky(ab):
    return _impl.band_cholesky(_block(ab))


def band_cho_solve(rb, b):
    return _impl.band_cho_solve(_block(rb), _block(b))


def discrete_gradient(kind, a, b):
    return _impl.discrete_gradient(int(kind), _block(a), _block(b))


def column_sum(x):
    """Fixed-order column sums of a 1-D or 2-D array (scalar for 1-D input)."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        return float(_impl.column_sum(_block(x[:, None]))[0])
    return _impl.column_sum(_block(x))


def matmul(a, x):
    """``a @ x`` with a summation order independent of the number of columns."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        return _impl.matmul(_block(a), _block(x[:, None]))[:, 0]
    return _impl.matmul(_block(a), _block(x))
