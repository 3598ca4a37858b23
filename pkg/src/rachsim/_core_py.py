"""Pure-NumPy SINR kernel, the fallback for the compiled extension.

Given the precomputed per-(BS, device) path-gain ratios and one slot's
fresh fading draws, returns the SINR of every eligible device at its
serving BS.  Must stay call-compatible with ``rachsim._core``.
"""

from __future__ import annotations

import numpy as np

KERNEL_NAME = "numpy"


def slot_sinr(
    rho: float,
    sigma2: float,
    ratio_pow: np.ndarray,      # (B, N) (r_i/d_bi)^alpha, own-cell entries exactly 1
    eligible: np.ndarray,       # (E,) device indices attempting this slot
    assoc_eligible: np.ndarray, # (E,) serving-BS index per eligible device
    h: np.ndarray,              # (B, E) unit-mean exponential fading, fresh per slot
) -> np.ndarray:
    n_eligible = eligible.size
    if n_eligible == 0:
        return np.empty(0)
    received = rho * h * ratio_pow[:, eligible]          # (B, E)
    totals = received.sum(axis=1)                        # (B,)
    cols = np.arange(n_eligible)
    own = received[assoc_eligible, cols]
    return own / (totals[assoc_eligible] - own + sigma2)
