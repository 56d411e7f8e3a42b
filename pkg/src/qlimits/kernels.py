"""Backend selection for the grid-evaluation kernels.

The compiled extension is used when importable; otherwise the pure-numpy
implementation takes over transparently.  Set ``QLIMITS_PURE_PYTHON=1`` to
force the numpy backend (used by the benchmark and the parity tests).
Both backends implement the identical contract documented in
``qlimits._kernels_py``; ``BACKEND`` names the one in use.
"""
from __future__ import annotations

import os

import numpy as np

from . import _kernels_py

if os.environ.get("QLIMITS_PURE_PYTHON"):
    _impl = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _kernels_cy as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:
        _impl = _kernels_py
        BACKEND = "python"


def _c128(a):
    return np.ascontiguousarray(a, dtype=np.complex128)


def _f64(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def diag_abs2(S, lam, times):
    return _impl.diag_abs2(_c128(S), _f64(lam), _f64(times))


def cross_sums(S, lam, times, c, d, E, j_lo, j_hi):
    return _impl.cross_sums(
        _c128(S), _f64(lam), _f64(times), _c128(c), _c128(d), _f64(E), int(j_lo), int(j_hi)
    )


def sin_cross_sums(S, lam, times, c, d, E, j_lo, j_hi):
    return _impl.sin_cross_sums(
        _c128(S), _f64(lam), _f64(times), _c128(c), _c128(d), _f64(E), int(j_lo), int(j_hi)
    )
