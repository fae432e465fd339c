"""Kernel dispatch: the compiled extension when built, numpy otherwise.

Set ``RFAMP_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _fallback

BACKEND = "python"
if os.environ.get("RFAMP_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _impl

        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _fallback
else:
    _impl = _fallback

mcr_stage_voltage = _impl.mcr_stage_voltage
chain_backsolve = _impl.chain_backsolve
impedance_forward = _impl.impedance_forward

__all__ = ["BACKEND", "mcr_stage_voltage", "chain_backsolve", "impedance_forward"]
