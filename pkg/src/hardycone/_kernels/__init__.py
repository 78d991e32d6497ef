"""Hot-loop kernels with a compiled backend and a pure-Python fallback.

The compiled extension is used when it was built at install time. Set
``HARDY_PURE_PYTHON=1`` to force the fallback (both backends implement the
same algorithm and agree to rounding).
"""
from __future__ import annotations

import os
from typing import NamedTuple

import numpy as np

from . import _pykernels

_backend = _pykernels
if os.environ.get("HARDY_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as _backend  # type: ignore[no-redef]
    except ImportError:  # extension not built
        _backend = _pykernels

BACKEND: str = _backend.BACKEND

STATUS_END = _pykernels.STATUS_END
STATUS_ZERO = _pykernels.STATUS_ZERO
STATUS_UNDERFLOW = _pykernels.STATUS_UNDERFLOW
STATUS_DEGENERATE = _pykernels.STATUS_DEGENERATE
STATUS_MAX_STEPS = _pykernels.STATUS_MAX_STEPS


class Trajectory(NamedTuple):
    status: int
    t: float
    w: float
    dw: float
    steps: int
    sample_w: np.ndarray
    sample_dw: np.ndarray


def available_backends() -> dict:
    out = {"python": _pykernels}
    try:
        from . import _ckernels
    except ImportError:
        pass
    else:
        out["cython"] = _ckernels
    return out


def rhs(t, w, dw, lam, n, p, backend=None) -> float:
    mod = _backend if backend is None else available_backends()[backend]
    return mod.rhs(float(t), float(w), float(dw), float(lam), float(n), float(p))


def integrate_profile(lam, n, p, t0, w0, dw0, t_end, rtol, atol, stop_at_zero=True,
                      samples=None, h_max=0.05, max_steps=1_000_000, backend=None) -> Trajectory:
    mod = _backend if backend is None else available_backends()[backend]
    if samples is not None:
        samples = np.ascontiguousarray(samples, dtype=np.float64)
    status, t, w, v, steps, sw, sv = mod.integrate_profile(
        float(lam), float(n), float(p), float(t0), float(w0), float(dw0), float(t_end),
        float(rtol), float(atol), bool(stop_at_zero), samples, float(h_max), int(max_steps),
    )
    return Trajectory(int(status), t, w, v, int(steps),
                      np.asarray(sw, dtype=np.float64), np.asarray(sv, dtype=np.float64))
