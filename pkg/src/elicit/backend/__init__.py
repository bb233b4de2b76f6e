"""Kernel backend selection.

Prefers the compiled ``_kernels`` extension; falls back to the numpy
implementation when the extension was not built. Set ELICIT_PURE_PYTHON=1 to
force the fallback (used by the benchmark and the cross-checking tests).
Both backends expose the same four functions and agree to float64 rounding.
"""

import os

from . import kernels_py

if os.environ.get("ELICIT_PURE_PYTHON", "") not in ("", "0"):
    _impl = kernels_py
    COMPILED = False
else:
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]

        COMPILED = True
    except ImportError:
        _impl = kernels_py
        COMPILED = False

BACKEND_NAME = "compiled" if COMPILED else "numpy"

mmd2_energy = _impl.mmd2_energy
mmd2_energy_grad = _impl.mmd2_energy_grad
mmd2_gaussian = _impl.mmd2_gaussian
mmd2_gaussian_grad = _impl.mmd2_gaussian_grad
