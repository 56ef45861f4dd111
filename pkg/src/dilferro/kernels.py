"""Kernel backend selection.

The compiled extension ``dilferro._core`` is preferred when importable; the
pure NumPy/Python twin ``dilferro._kernels_py`` is used otherwise.  Setting
``DILFERRO_PURE=1`` in the environment forces the fallback (useful for
benchmarks and for testing backend parity).
"""

from __future__ import annotations

import os

from . import _kernels_py

if os.environ.get("DILFERRO_PURE") == "1":
    _backend = _kernels_py
    BACKEND = "fallback"
else:
    try:
        from . import _core as _backend  # type: ignore[no-redef]

        BACKEND = "compiled"
    except ImportError:
        _backend = _kernels_py
        BACKEND = "fallback"

config_energies = _backend.config_energies
wht_inplace = _backend.wht_inplace
glauber_run = _backend.glauber_run
rng_fill = _backend.rng_fill


def backend_name() -> str:
    return BACKEND


def available_backends() -> dict:
    """Importable backend modules keyed by name (for benchmarks and tests)."""
    found = {"fallback": _kernels_py}
    try:
        from . import _core

        found["compiled"] = _core
    except ImportError:
        pass
    return found
