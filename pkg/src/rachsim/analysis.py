"""Single-slot closed-form analysis of preamble contention.

A transmission succeeds when its SINR at the serving BS clears the
threshold.  Averaging over Rayleigh fading, interferer activity, and
random cell sizes factorizes the success probability into a noise term,
the Laplace transform of inter-cell interference, and the Laplace
transform of intra-cell interference.  Everything here is a pure function
of an :class:`ActivityState` (how many devices are contending) and the
network parameters.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate
from scipy.special import gammainc, gammaln

from .params import NetworkParams

# Truncation threshold for the infinite cell-occupancy sums: the summation
# stops once the remaining tail mass is provably below this bound.
PMF_TAIL = 1e-12


class NumericError(ArithmeticError):
    """A quadrature or special-function evaluation failed to converge."""


@dataclass(frozen=True)
class ActivityState:
    """Fraction of devices contending in a slot.

    `t_nonempty` is the probability a device has something to send,
    `r_nonrestrict` the probability the access scheme lets it try, and
    `load` the resulting mean number of active same-preamble devices per
    cell, T*R*lambda_dp/lambda_b.  The closed forms only ever consume the
    product, exposed here as `load`.
    """

    t_nonempty: float
    r_nonrestrict: float
    load: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.t_nonempty <= 1.0:
            raise ValueError(f"non-empty probability outside [0,1]: {self.t_nonempty}")
        if not 0.0 <= self.r_nonrestrict <= 1.0:
            raise ValueError(f"non-restrict probability outside [0,1]: {self.r_nonrestrict}")
        if self.load < 0.0:
            raise ValueError(f"negative load: {self.load}")

    @classmethod
    def for_network(
        cls, t_nonempty: float, r_nonrestrict: float, params: NetworkParams
    ) -> "ActivityState":
        load = t_nonempty * r_nonrestrict * params.lambda_dp / params.lambda_b
        return cls(t_nonempty, r_nonrestrict, load)


@dataclass(frozen=True)
class SlotAnalysis:
    """Analytical state of one slot."""

    m: int                  # slot index, 1-based
    mu_new: float           # mean new packets this slot
    mu_cum: float           # mean backlog carried into this slot
    activity: ActivityState
    p_success: float        # transmission success probability (random device)
    p_detect: float         # detection probability (random non-empty cell)
    c_received: float       # received packets per BS per preamble
    q_len: float            # mean end-of-slot queue length


def _integral_quadrature(gamma_th: float, alpha: float) -> float:
    # Substituting u = 1/y maps the infinite tail onto [0, gamma^(1/alpha)]:
    # integrand u^(alpha-3)/(1+u^alpha), integrable at 0 for alpha > 2.
    upper = gamma_th ** (1.0 / alpha)
    value, abserr = integrate.quad(
        lambda u: u ** (alpha - 3.0) / (1.0 + u**alpha),
        0.0,
        upper,
        epsabs=1e-13,
        epsrel=1e-13,
        limit=200,
    )
    if not math.isfinite(value) or abserr > 1e-10:
        raise NumericError(
            f"interference integral did not converge (gamma={gamma_th}, alpha={alpha}, err={abserr})"
        )
    return value


@lru_cache(maxsize=512)
def interference_integral(
    gamma_th: float, alpha: float, force_quadrature: bool = False
) -> float:
    """Integral of y/(1+y^alpha) from gamma_th^(-1/alpha) to infinity.

    At alpha=4 the antiderivative is arctan(y^2)/2, which gives an exact
    fast path; `force_quadrature` bypasses it so the adaptive quadrature
    can be validated against the closed form.
    """
    if gamma_th <= 0:
        raise ValueError(f"SINR threshold must be positive, got {gamma_th}")
    if alpha <= 2:
        raise ValueError(f"integral diverges for alpha <= 2, got {alpha}")
    if alpha == 4.0 and not force_quadrature:
        return 0.5 * math.atan(math.sqrt(gamma_th))
    return _integral_quadrature(gamma_th, alpha)


def transmit_power_moment(
    k: float, params: NetworkParams, p_max: float = math.inf
) -> float:
    """k-th moment of the channel-inversion transmit power.

    With a finite power cap the serving distance is conditioned on the
    inversion being feasible, which brings in a lower incomplete gamma
    function; with no cap the expression collapses to a plain gamma
    moment, and at k = 2/alpha to rho^(2/alpha)/(pi*lambda_b).
    """
    if k <= 0:
        raise ValueError(f"moment order must be positive, got {k}")
    shape = k * params.alpha / 2.0 + 1.0
    scale = (math.pi * params.lambda_b) ** (k * params.alpha / 2.0)
    if math.isinf(p_max):
        return params.rho**k * math.exp(gammaln(shape)) / scale
    b = math.pi * params.lambda_b * (p_max / params.rho) ** (2.0 / params.alpha)
    lower_gamma = gammainc(shape, b) * math.exp(gammaln(shape))
    denom = 1.0 - math.exp(-b)
    if denom <= 0.0 or not math.isfinite(lower_gamma):
        raise NumericError(f"incomplete-gamma evaluation failed (k={k}, p_max={p_max})")
    return params.rho**k * lower_gamma / (scale * denom)


def laplace_inter(act: ActivityState, params: NetworkParams) -> float:
    """Laplace transform of aggregate inter-cell interference at s=gamma/rho."""
    integral = interference_integral(params.gamma_th, params.alpha)
    exponent = 2.0 * params.gamma_th ** (2.0 / params.alpha) * act.load * integral
    return math.exp(-exponent)


def _log_pmf_sized_cell(n: np.ndarray, load: float, c: float) -> np.ndarray:
    # Interferer count in the cell of a randomly chosen device: negative
    # binomial with index c+1 arising from the size-biased cell area.
    n = np.asarray(n, dtype=float)
    return (
        (c + 1.0) * math.log(c)
        + gammaln(n + c + 1.0)
        + n * math.log(load)
        - gammaln(c + 1.0)
        - gammaln(n + 1.0)
        - (n + c + 1.0) * math.log(load + c)
    )


def _log_pmf_random_cell(n: np.ndarray, load: float, c: float) -> np.ndarray:
    # Occupancy of a uniformly chosen cell: negative binomial with index c.
    n = np.asarray(n, dtype=float)
    return (
        c * math.log(c)
        + gammaln(n + c)
        + n * math.log(load)
        - gammaln(c)
        - gammaln(n + 1.0)
        - (n + c) * math.log(load + c)
    )


def cell_pmf_device(n, act: ActivityState, params: NetworkParams):
    """P{n active interfering devices share the cell of a random device}."""
    scalar = np.isscalar(n)
    n_arr = np.atleast_1d(np.asarray(n))
    if np.any(n_arr < 0):
        raise ValueError("counts must be non-negative")
    if act.load == 0.0:
        out = np.where(n_arr == 0, 1.0, 0.0)
    else:
        out = np.exp(_log_pmf_sized_cell(n_arr, act.load, params.c_const))
    return float(out[0]) if scalar else out


def cell_pmf_random_bs(n, act: ActivityState, params: NetworkParams):
    """P{n active devices in a uniformly chosen cell}."""
    scalar = np.isscalar(n)
    n_arr = np.atleast_1d(np.asarray(n))
    if np.any(n_arr < 0):
        raise ValueError("counts must be non-negative")
    if act.load == 0.0:
        out = np.where(n_arr == 0, 1.0, 0.0)
    else:
        out = np.exp(_log_pmf_random_cell(n_arr, act.load, params.c_const))
    return float(out[0]) if scalar else out


def cell_pmf_random_bs_nonempty(n, act: ActivityState, params: NetworkParams):
    """P{n interferers around a tagged device in a uniformly chosen non-empty cell}.

    Equals P{occupancy = n+1} / (1 - P{occupancy = 0}).
    """
    scalar = np.isscalar(n)
    n_arr = np.atleast_1d(np.asarray(n))
    if np.any(n_arr < 0):
        raise ValueError("counts must be non-negative")
    if act.load == 0.0:
        # Degenerate limit: the one occupant of a non-empty cell has no peers.
        out = np.where(n_arr == 0, 1.0, 0.0)
        return float(out[0]) if scalar else out
    c = params.c_const
    # 1 - P{occupancy = 0} via expm1 to survive vanishing loads without
    # cancellation (P{0} -> 1 as the load -> 0)
    p_nonempty = -math.expm1(-c * math.log1p(act.load / c))
    out = np.exp(_log_pmf_random_cell(n_arr + 1.0, act.load, c)) / p_nonempty
    return float(out[0]) if scalar else out


def truncated_support(pmf, tail: float = PMF_TAIL, block: int = 256, max_n: int = 1_000_000):
    """Support [0..N] of a PMF over counts with tail mass below `tail`.

    `pmf` maps an integer array to probabilities.  Works for any
    distribution whose tail eventually decays at least geometrically
    (true for the negative-binomial cell laws and Poisson mixtures used
    here); the loop stops once the remaining mass 1 - cumsum drops under
    the bound.
    """
    masses = []
    total = 0.0
    start = 0
    while start < max_n:
        ns = np.arange(start, start + block)
        vals = np.asarray(pmf(ns), dtype=float)
        masses.append(vals)
        total += float(vals.sum())
        if 1.0 - total < tail:
            full = np.concatenate(masses)
            # trim trailing all-zero entries beyond the bound
            return np.arange(full.size), full
        start += block
    raise NumericError(f"PMF support exceeded {max_n} without reaching tail < {tail}")


def laplace_intra_device(act: ActivityState, params: NetworkParams) -> float:
    """Laplace transform of intra-cell interference seen by a random device.

    Closed form of the series sum_n P{n interferers} (1+gamma)^-n.
    """
    g = params.gamma_th
    c = params.c_const
    return (1.0 + act.load * g / (c * (1.0 + g))) ** (-c - 1.0)


def laplace_intra_device_series(
    act: ActivityState, params: NetworkParams, tail: float = PMF_TAIL
) -> float:
    """Direct tail-truncated evaluation of the intra-cell series."""
    if act.load == 0.0:
        return 1.0
    t = 1.0 / (1.0 + params.gamma_th)
    ns, masses = truncated_support(lambda n: cell_pmf_device(n, act, params), tail)
    return float(np.sum(masses * t**ns))


def noise_factor(params: NetworkParams) -> float:
    """Fading tail against thermal noise alone: exp(-gamma * sigma2 / rho)."""
    return math.exp(-params.gamma_th * params.sigma2 / params.rho)


def preamble_success(act: ActivityState, params: NetworkParams) -> float:
    """Success probability of a random device's preamble transmission."""
    return noise_factor(params) * laplace_inter(act, params) * laplace_intra_device(act, params)


def preamble_detection(
    act: ActivityState, params: NetworkParams, tail: float = PMF_TAIL
) -> float:
    """Detection probability of a tagged device in a random non-empty cell.

    Evaluated as the tail-truncated series over the conditional
    random-cell interferer PMF; this is the authoritative value.  See
    :func:`preamble_detection_closed_form` for the alternative printed
    closed form kept for comparison.
    """
    base = noise_factor(params) * laplace_inter(act, params)
    if act.load == 0.0:
        return base
    t = 1.0 / (1.0 + params.gamma_th)
    ns, masses = truncated_support(
        lambda n: cell_pmf_random_bs_nonempty(n, act, params), tail
    )
    return base * float(np.sum(masses * t**ns))


def preamble_detection_closed_form(act: ActivityState, params: NetworkParams) -> float:
    """Verbatim closed-form variant of the detection probability.

    Kept strictly as printed for comparison against the series form; the
    two disagree (the series is the trusted route).  Undefined at zero
    load (0/0), where NaN is returned.
    """
    a = act.load
    if a == 0.0:
        return math.nan
    g = params.gamma_th
    c = params.c_const
    base = noise_factor(params) * laplace_inter(act, params)
    bracket = (1.0 + a * g / (c * (1.0 + g))) ** (-c) - (c / (c + a)) ** (-c)
    trailing = (1.0 + g) * (1.0 + a) ** c / ((1.0 + a) ** c - 1.0)
    return base * bracket * trailing


def received_packets_per_bs(act: ActivityState, params: NetworkParams) -> float:
    """Mean successfully received packets per BS per preamble per slot."""
    return act.load * preamble_success(act, params)


def optimal_bs_density(act: ActivityState, params: NetworkParams) -> float:
    """BS density maximizing received packets per BS, for fixed T*R*lambda_dp.

    Stationary point of load * success(load) in the BS density; `act` and
    `params` fix the active device density T*R*lambda_dp while the BS
    density itself is the free variable.
    """
    active_density = act.t_nonempty * act.r_nonrestrict * params.lambda_dp
    if active_density <= 0:
        raise ValueError("optimal density undefined at zero active density")
    g = params.gamma_th
    c = params.c_const
    integral = interference_integral(g, params.alpha)
    k = 2.0 * g ** (2.0 / params.alpha) * integral
    ratio = g / (1.0 + g)
    root = math.sqrt(
        k * k
        + ratio * ratio
        + (4.0 + 8.0 / c) * integral * g ** ((params.alpha + 2.0) / params.alpha) / (1.0 + g)
    )
    return active_density / 2.0 * (k + ratio + root)
