"""Kernel selection: compiled extension when built, NumPy otherwise.

Set RACHSIM_PURE=1 to force the NumPy path even when the extension is
available (used by the kernel benchmark and the parity tests).
"""

from __future__ import annotations

import os

from . import _core_py

if os.environ.get("RACHSIM_PURE"):
    _impl = _core_py
else:
    try:
        from . import _core as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = _core_py

slot_sinr = _impl.slot_sinr
KERNEL_NAME: str = _impl.KERNEL_NAME


def available_kernels() -> dict:
    """Name -> slot_sinr callable for every importable kernel."""
    kernels = {_core_py.KERNEL_NAME: _core_py.slot_sinr}
    try:
        from . import _core

        kernels[_core.KERNEL_NAME] = _core.slot_sinr
    except ImportError:
        pass
    return kernels
