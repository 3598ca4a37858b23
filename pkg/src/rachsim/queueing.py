"""Queue evolution across slots for the three access schemes.

Each device buffers Poisson arrivals and removes at most one packet per
slot when its attempt succeeds.  The per-slot pipeline is: update the
backlog intensity from the previous slot, derive the non-empty
probability, apply the scheme's non-restrict rule, then evaluate the
single-slot success probability at the resulting load.  Slots 2 and 3
also admit exact backlog PMFs, kept here as the oracle for the Poisson
backlog approximation used from slot 4 on.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.stats import poisson

from . import analysis
from .analysis import ActivityState, SlotAnalysis
from .params import ACB, BACKOFF, NetworkParams, SchemeConfig, TrafficProfile

# Truncation threshold for backlog PMF supports.
PMF_TAIL = 1e-12

# Readings of the ambiguous trailing non-empty factor in the back-off
# non-restrict rule: "printed" multiplies the deferral sum by T^m,
# "conditional" divides it (deferred devices are necessarily non-empty,
# so the conditional form is P{unrestricted | non-empty}).
BACKOFF_PRINTED = "printed"
BACKOFF_CONDITIONAL = "conditional"


@dataclass(frozen=True)
class QueuePmf:
    """Tail-truncated backlog PMF at the start of one slot."""

    support: np.ndarray
    mass: np.ndarray
    slot: int

    def cdf(self, y: int) -> float:
        if y < 0:
            return 0.0
        return float(self.mass[: min(y + 1, self.mass.size)].sum())

    def cdf_grid(self) -> np.ndarray:
        return np.cumsum(self.mass)


@dataclass
class SchemeTrace:
    """Per-slot analytical trajectory under one scheme."""

    scheme: SchemeConfig
    slots: list[SlotAnalysis]
    # per-slot deferral terms (1 - P^j) T^j R^j consumed by the back-off rule
    history: list[float]


def nonrestrict(
    scheme: SchemeConfig,
    m: int,
    history: list[float],
    t_nonempty: float,
    reading: str = BACKOFF_PRINTED,
) -> float:
    """Probability the scheme permits an attempt in slot m.

    `history[j-1]` must hold (1 - P^j) T^j R^j for slots j = 1..m-1.  The
    back-off rule subtracts the deferred fraction accumulated over the
    last t_bo slots; the result is clamped to [0, 1] with a diagnostic if
    the raw formula leaves the unit interval.
    """
    if scheme.variant == ACB:
        return scheme.p_acb
    if scheme.variant != BACKOFF:
        return 1.0
    if m == 1:
        return 1.0
    if len(history) < m - 1:
        raise ValueError(f"back-off rule at slot {m} needs history for slots 1..{m - 1}")
    lo = max(1, m - scheme.t_bo)
    deferred = sum(history[lo - 1 : m - 1])
    if reading == BACKOFF_PRINTED:
        raw = 1.0 - deferred * t_nonempty
    elif reading == BACKOFF_CONDITIONAL:
        raw = 1.0 - deferred / t_nonempty if t_nonempty > 0.0 else 1.0
    else:
        raise ValueError(f"unknown back-off reading {reading!r}")
    if raw < 0.0 or raw > 1.0:
        warnings.warn(
            f"back-off non-restrict left [0,1] at slot {m} ({raw:.6f}); clamped",
            RuntimeWarning,
            stacklevel=2,
        )
    return min(1.0, max(0.0, raw))


def evolve(
    params: NetworkParams,
    traffic: TrafficProfile,
    scheme: SchemeConfig,
    n_slots: int | None = None,
    backoff_reading: str = BACKOFF_PRINTED,
) -> SchemeTrace:
    """Evolve (backlog intensity, T, R, P) over `n_slots` slots."""

    m_total = traffic.n_slots if n_slots is None else n_slots
    if m_total < 1:
        raise ValueError("need at least one slot")
    if m_total > traffic.n_slots:
        raise ValueError(
            f"traffic profile covers {traffic.n_slots} slots, asked for {m_total}"
        )

    mu_new = traffic.mu_new
    trace = SchemeTrace(scheme=scheme, slots=[], history=[])
    mu_cum = 0.0
    for m in range(1, m_total + 1):
        if m > 1:
            prev = trace.slots[-1]
            drained = (
                prev.activity.r_nonrestrict
                * prev.p_success
                * (1.0 - math.exp(-prev.mu_new - prev.mu_cum))
            )
            mu_cum = prev.mu_new + prev.mu_cum - drained
            if mu_cum < 0.0:
                # the drained mass is bounded by the non-empty mass, so any
                # negative value is floating-point dust
                warnings.warn(
                    f"backlog intensity clamped to 0 at slot {m} ({mu_cum:.3e})",
                    RuntimeWarning,
                    stacklevel=2,
                )
                mu_cum = 0.0
        t_m = 1.0 - math.exp(-mu_new[m - 1] - mu_cum)
        r_m = nonrestrict(scheme, m, trace.history, t_m, reading=backoff_reading)
        act = ActivityState.for_network(t_m, r_m, params)
        p_m = analysis.preamble_success(act, params)
        slot = SlotAnalysis(
            m=m,
            mu_new=mu_new[m - 1],
            mu_cum=mu_cum,
            activity=act,
            p_success=p_m,
            p_detect=analysis.preamble_detection(act, params),
            c_received=analysis.received_packets_per_bs(act, params),
            q_len=avg_queue_length(mu_new[m - 1], mu_cum, t_m, r_m, p_m),
        )
        trace.slots.append(slot)
        trace.history.append((1.0 - p_m) * t_m * r_m)
    return trace


def avg_queue_length(
    mu_new: float, mu_cum: float, t_nonempty: float, r_nonrestrict: float, p_success: float
) -> float:
    """Mean packets left in the buffer at the end of a slot."""
    return mu_new + mu_cum - r_nonrestrict * t_nonempty * p_success


def trace_means(trace: SchemeTrace) -> tuple[float, float]:
    """Arithmetic means of P and C over the trace's slots."""
    n = len(trace.slots)
    mean_p = sum(s.p_success for s in trace.slots) / n
    mean_c = sum(s.c_received for s in trace.slots) / n
    return mean_p, mean_c


def _poisson_pmf_grid(mu: float, n_max: int) -> np.ndarray:
    return poisson.pmf(np.arange(n_max + 1), mu)


def _truncation_size(mu: float, tail: float) -> int:
    # smallest N with Poisson tail beyond N below `tail`
    n = max(8, int(mu + 10.0 * math.sqrt(mu + 1.0)))
    while poisson.sf(n, mu) >= tail:
        n *= 2
    return n


def exact_pmf_slot2(
    mu_new1: float, r1: float, p1: float, tail: float = PMF_TAIL
) -> QueuePmf:
    """Exact backlog PMF at the start of slot 2.

    Starting empty, the backlog is the slot-1 arrivals minus one packet
    removed with probability r1*p1 whenever at least one was present:
    mass at 0 is e^-mu (stayed empty) plus mu e^-mu r1 p1 (one arrival,
    drained); mass at x>0 mixes "x arrivals, no drain" with "x+1
    arrivals, drained".
    """
    if mu_new1 < 0:
        raise ValueError("arrival intensity must be non-negative")
    rp = r1 * p1
    n_max = _truncation_size(mu_new1, tail)
    pois = _poisson_pmf_grid(mu_new1, n_max + 1)
    mass = np.empty(n_max + 1)
    mass[0] = pois[0] + pois[1] * rp
    x = np.arange(1, n_max + 1)
    mass[1:] = pois[x] * (1.0 - rp) + pois[x + 1] * rp
    return QueuePmf(support=np.arange(n_max + 1), mass=mass, slot=2)


def exact_cdf_slot2(y: int, mu_new1: float, r1: float, p1: float) -> float:
    """Exact slot-2 backlog CDF: Poisson CDF plus the drained boundary term."""
    if y < 0:
        return 0.0
    rp = r1 * p1
    return float(poisson.pmf(y + 1, mu_new1) * rp + poisson.cdf(y, mu_new1))


def exact_pmf_slot3(
    slot2: QueuePmf, mu_new2: float, r2: float, p2: float, tail: float = PMF_TAIL
) -> QueuePmf:
    """Exact backlog PMF at the start of slot 3.

    Convolves the slot-2 backlog with slot-2 arrivals, with and without
    one drained packet, weighted by r2*p2.
    """
    if slot2.slot != 2:
        raise ValueError("slot-3 PMF must be built from the slot-2 PMF")
    rp = r2 * p2
    n_arr = _truncation_size(mu_new2, tail)
    pois = _poisson_pmf_grid(mu_new2, n_arr)
    # distribution of backlog + arrivals before any drain
    total = np.convolve(slot2.mass, pois)
    n_max = total.size - 1
    tot = np.append(total, 0.0)
    mass = np.empty(n_max + 1)
    # an empty buffer cannot drain, so the x=0 point keeps total==0 whole
    mass[0] = tot[0] + rp * tot[1]
    mass[1:] = (1.0 - rp) * tot[1 : n_max + 1] + rp * tot[2 : n_max + 2]
    return QueuePmf(support=np.arange(n_max + 1), mass=mass, slot=3)


def poisson_approx_cdf(mu_cum: float, y: int) -> float:
    """Poisson-backlog approximation of the CDF at count y."""
    if y < 0:
        return 0.0
    return float(poisson.cdf(y, mu_cum))


def cdf_sup_distance(pmf: QueuePmf, mu_cum: float) -> float:
    """Sup-norm distance between an exact backlog CDF and its Poisson stand-in."""
    exact = pmf.cdf_grid()
    approx = poisson.cdf(pmf.support, mu_cum)
    return float(np.max(np.abs(exact - approx)))
