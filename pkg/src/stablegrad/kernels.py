"""Backend dispatch for the hot kernels.

The numba backend is the default when importable; set STABLEGRAD_NO_NUMBA=1
(or call set_backend("numpy")) to run the pure-numpy path instead. Both
backends expose the same functions with identical semantics.
"""

from __future__ import annotations

import os

from . import _np_kernels
from ._np_kernels import (  # noqa: F401  (re-exported codes)
    DRIFT_ARCTAN,
    DRIFT_LINEAR,
    DRIFT_ZERO,
    NL_ARCTAN,
    NL_CONST,
    NL_ZERO,
    WEIGHT_DRIFT_CORRECTED,
    WEIGHT_FLOW,
)

_BACKENDS = {"numpy": _np_kernels}

try:
    from . import _nb_kernels

    _BACKENDS["numba"] = _nb_kernels
except ImportError:  # pragma: no cover - numba is a hard dep, but stay usable
    _nb_kernels = None

_DISABLED = os.environ.get("STABLEGRAD_NO_NUMBA", "").strip().lower() in (
    "1", "true", "yes", "on",
)
_active = "numba" if ("numba" in _BACKENDS and not _DISABLED) else "numpy"


def available_backends() -> tuple[str, ...]:
    return tuple(sorted(_BACKENDS))


def get_backend() -> str:
    return _active


def set_backend(name: str) -> None:
    global _active
    if name not in _BACKENDS:
        raise ValueError(f"unknown backend {name!r}; have {available_backends()}")
    _active = name


def cms_stable(u, e, beta):
    return _BACKENDS[_active].cms_stable(u, e, beta)


def sde_flow_stats(drift_kind, A, scale, sigma, sigma_inv, x0, h, t, dW,
                   weight_mode):
    return _BACKENDS[_active].sde_flow_stats(
        drift_kind, A, scale, sigma, sigma_inv, x0, h, t, dW, weight_mode)


def galerkin_paths(damp, phidt, bdW, x0, f_kind, f_scale, f_const):
    return _BACKENDS[_active].galerkin_paths(
        damp, phidt, bdW, x0, f_kind, f_scale, f_const)
