"""Hot-kernel backend selection.

The compiled ``_core`` extension is used when it has been built; otherwise the
numpy implementation in ``_fallback`` is used. Set ``JOINTMPC_PURE_PYTHON=1``
to force the fallback.
"""

import os

from . import _fallback
from ._fallback import (BANDWIDTH, D_MIN, FOV, GAMMA, KAPPA, MU, N_CONSTS, N_ULA, SIGMA, SNR0, TS,
                        W_COMM, W_SAFE, WAVENUMBER)

BACKEND = "python"
_impl = _fallback
if os.environ.get("JOINTMPC_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _core as _impl  # type: ignore[no-redef]
        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _fallback

comm_value_grad = _impl.comm_value_grad
safety_value_grad = _impl.safety_value_grad
horizon_eval = _impl.horizon_eval

__all__ = [
    "BACKEND", "comm_value_grad", "safety_value_grad", "horizon_eval", "N_CONSTS",
    "TS", "W_COMM", "W_SAFE", "MU", "D_MIN", "WAVENUMBER", "GAMMA", "SNR0", "BANDWIDTH",
    "N_ULA", "KAPPA", "SIGMA", "FOV",
]
