"""Numeric kernel backend selection.

The compiled extension is preferred when importable; the numpy fallback is
always available. ``TRENDLAG_BACKEND=python`` (or ``cython``) forces a choice,
which matters for determinism audits: the two backends agree to float64
round-off, not bit-for-bit.
"""

from __future__ import annotations

import os
from types import ModuleType

from trendlag.nn import _kernels_py


def available_backends() -> dict[str, ModuleType]:
    backends: dict[str, ModuleType] = {}
    try:
        from trendlag.nn import _kernels_cy  # type: ignore[attr-defined]

        backends[_kernels_cy.BACKEND_NAME] = _kernels_cy
    except ImportError:
        pass
    backends[_kernels_py.BACKEND_NAME] = _kernels_py
    return backends


def _select() -> ModuleType:
    forced = os.environ.get("TRENDLAG_BACKEND", "").strip().lower()
    backends = available_backends()
    if forced:
        if forced not in backends:
            raise ImportError(
                f"TRENDLAG_BACKEND={forced!r} requested but only "
                f"{sorted(backends)} are available"
            )
        return backends[forced]
    return backends.get("cython", _kernels_py)


_impl = _select()

BACKEND = _impl.BACKEND_NAME
conv1d_kernel_forward = _impl.conv1d_forward
conv1d_kernel_backward = _impl.conv1d_backward
dense_kernel_forward = _impl.dense_forward
dense_kernel_backward = _impl.dense_backward
adam_kernel_update = _impl.adam_update
