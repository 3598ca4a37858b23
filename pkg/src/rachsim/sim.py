"""Monte Carlo spatial simulator for slotted preamble contention.

One realization samples BSs and one preamble's device population as
independent PPPs on a square with wrap-around (torus) distances, then
plays the slotted process: Poisson arrivals into per-device FCFS queues,
scheme gating, SINR evaluation at each serving BS under channel-inversion
power control, and one-packet departures on success.  Positions are fixed
for the whole realization; fading is redrawn every slot.

Randomness is split into independent sub-streams (deployment, arrivals,
fading, ACB draws, detection sampling) so schemes can be compared on
common random numbers, and realizations use independently derived seeds
so ensembles are reproducible at any level of parallelism.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .params import ACB, BACKOFF, NetworkParams, SchemeConfig, TrafficProfile


@dataclass(frozen=True)
class Deployment:
    """One sampled spatial configuration (positions fixed across slots)."""

    side: float                 # region side, m (torus metric)
    bs_xy: np.ndarray           # (B, 2)
    dev_xy: np.ndarray          # (N, 2)
    assoc: np.ndarray           # (N,) serving-BS index (nearest in torus metric)
    serve_dist: np.ndarray      # (N,) serving distance, m
    ratio_pow: np.ndarray       # (B, N) (r_i / d_bi)^alpha, own-cell entries exactly 1

    @property
    def n_bs(self) -> int:
        return self.bs_xy.shape[0]

    @property
    def n_dev(self) -> int:
        return self.dev_xy.shape[0]


@dataclass
class SlotTally:
    """Counting statistics of one simulated slot."""

    m: int
    n_nonempty: int = 0
    n_eligible: int = 0
    n_attempts: int = 0
    n_success: int = 0
    sum_queue_len: int = 0       # end of slot, after departures
    detect_num: int = 0          # successes of sampled devices, one per eligible cell
    detect_den: int = 0          # number of cells holding >= 1 eligible device
    queue_hist: np.ndarray | None = None


@dataclass
class RealizationResult:
    """Tallies plus per-device conservation totals for one realization."""

    tallies: list[SlotTally]
    n_bs: int
    n_dev: int
    arrivals_per_dev: np.ndarray
    departures_per_dev: np.ndarray
    final_queue: np.ndarray


def torus_distances(a_xy: np.ndarray, b_xy: np.ndarray, side: float) -> np.ndarray:
    """Pairwise wrap-around distances, shape (len(a), len(b))."""
    delta = np.abs(a_xy[:, None, :] - b_xy[None, :, :])
    delta = np.minimum(delta, side - delta)
    return np.hypot(delta[..., 0], delta[..., 1])


def sample_deployment(
    params: NetworkParams,
    side_m: float,
    rng: np.random.Generator | np.random.SeedSequence | int,
) -> Deployment:
    """Sample a PPP deployment of BSs and one preamble's devices."""
    expected_bs = params.lambda_b * side_m**2
    if expected_bs < 10.0:
        raise ValueError(
            f"region side {side_m} m gives expected BS count {expected_bs:.1f} < 10; enlarge it"
        )
    if expected_bs < 50.0:
        warnings.warn(
            f"expected BS count {expected_bs:.1f} < 50; boundary statistics will be noisy",
            RuntimeWarning,
            stacklevel=2,
        )
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)

    n_bs = int(rng.poisson(expected_bs))
    n_dev = int(rng.poisson(params.lambda_dp * side_m**2))
    if n_bs == 0:
        raise RuntimeError("sampled zero base stations; enlarge the region")
    bs_xy = rng.uniform(0.0, side_m, size=(n_bs, 2))
    dev_xy = rng.uniform(0.0, side_m, size=(n_dev, 2))

    dist = torus_distances(bs_xy, dev_xy, side_m)        # (B, N)
    assoc = np.argmin(dist, axis=0)
    cols = np.arange(n_dev)
    serve_dist = dist[assoc, cols]
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio_pow = (serve_dist[None, :] / dist) ** params.alpha
    ratio_pow[assoc, cols] = 1.0
    return Deployment(
        side=side_m,
        bs_xy=bs_xy,
        dev_xy=dev_xy,
        assoc=assoc.astype(np.intp),
        serve_dist=serve_dist,
        ratio_pow=np.ascontiguousarray(ratio_pow),
    )


def _sample_detection(
    assoc_eligible: np.ndarray, success: np.ndarray, rng: np.random.Generator
) -> tuple[int, int]:
    """One uniformly chosen eligible device per eligible cell; count successes.

    Every cell holding at least one eligible device contributes one
    equally weighted sample, the estimand being the success probability of
    a random device in a randomly chosen non-empty cell.
    """
    if assoc_eligible.size == 0:
        return 0, 0
    order = np.argsort(assoc_eligible, kind="stable")
    sorted_bs = assoc_eligible[order]
    unique_bs, counts = np.unique(sorted_bs, return_counts=True)
    offsets = np.concatenate(([0], np.cumsum(counts[:-1])))
    picks = offsets + np.floor(rng.random(unique_bs.size) * counts).astype(np.intp)
    chosen = order[picks]
    return int(np.count_nonzero(success[chosen])), int(unique_bs.size)


def run_realization(
    dep: Deployment,
    params: NetworkParams,
    traffic: TrafficProfile,
    scheme: SchemeConfig,
    n_slots: int,
    seed: np.random.SeedSequence | int,
    collect_queue_hist: bool = False,
) -> RealizationResult:
    """Play `n_slots` slots of the contention process on one deployment."""
    if n_slots < 1 or n_slots > traffic.n_slots:
        raise ValueError(f"n_slots must be in 1..{traffic.n_slots}")
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    arrivals_rng, fading_rng, acb_rng, detect_rng = (
        np.random.default_rng(s) for s in ss.spawn(4)
    )

    n_dev = dep.n_dev
    mu_new = traffic.mu_new
    queue = np.zeros(n_dev, dtype=np.int64)
    backoff_timer = np.zeros(n_dev, dtype=np.int64)
    arrivals_total = np.zeros(n_dev, dtype=np.int64)
    departures_total = np.zeros(n_dev, dtype=np.int64)

    tallies: list[SlotTally] = []
    for m in range(1, n_slots + 1):
        tally = SlotTally(m=m)
        arrivals = arrivals_rng.poisson(mu_new[m - 1], size=n_dev)
        arrivals_total += arrivals
        queue += arrivals
        nonempty = queue > 0
        tally.n_nonempty = int(np.count_nonzero(nonempty))

        if scheme.variant == ACB and scheme.p_acb < 1.0:
            gate = nonempty.copy()
            draws = acb_rng.random(tally.n_nonempty)
            gate[nonempty] = draws <= scheme.p_acb
        elif scheme.variant == BACKOFF:
            gate = nonempty & (backoff_timer == 0)
        else:
            gate = nonempty
        eligible = np.flatnonzero(gate).astype(np.intp)
        tally.n_eligible = tally.n_attempts = int(eligible.size)

        h = fading_rng.standard_exponential((dep.n_bs, eligible.size))
        sinr = kernels.slot_sinr(
            params.rho,
            params.sigma2,
            dep.ratio_pow,
            eligible,
            dep.assoc[eligible],
            h,
        )
        success = sinr >= params.gamma_th
        tally.n_success = int(np.count_nonzero(success))

        winners = eligible[success]
        queue[winners] -= 1
        departures_total[winners] += 1

        tally.detect_num, tally.detect_den = _sample_detection(
            dep.assoc[eligible], success, detect_rng
        )

        if scheme.variant == BACKOFF:
            # running timers advance; devices that failed this slot restart
            # the full deferral, blocking the next t_bo slots
            backoff_timer[backoff_timer > 0] -= 1
            backoff_timer[eligible[~success]] = scheme.t_bo

        tally.sum_queue_len = int(queue.sum())
        if collect_queue_hist:
            tally.queue_hist = np.bincount(queue)
        tallies.append(tally)

    assert np.array_equal(arrivals_total - departures_total, queue)
    return RealizationResult(
        tallies=tallies,
        n_bs=dep.n_bs,
        n_dev=n_dev,
        arrivals_per_dev=arrivals_total,
        departures_per_dev=departures_total,
        final_queue=queue.copy(),
    )


@dataclass
class EnsembleResult:
    """Per-slot estimates across independent realizations."""

    n_slots: int
    realizations: list[RealizationResult] = field(default_factory=list)

    def _per_real(self, num_field: str, den_field: str) -> tuple[np.ndarray, np.ndarray]:
        nums = np.array(
            [[getattr(t, num_field) for t in r.tallies] for r in self.realizations],
            dtype=float,
        )
        if den_field in ("n_dev", "n_bs"):
            dens = np.array(
                [[getattr(r, den_field)] * self.n_slots for r in self.realizations],
                dtype=float,
            )
        else:
            dens = np.array(
                [[getattr(t, den_field) for t in r.tallies] for r in self.realizations],
                dtype=float,
            )
        return nums, dens

    def estimate(self, metric: str) -> tuple[np.ndarray, np.ndarray]:
        """(pooled estimate, standard error) per slot for a named metric.

        Metrics: P (success/attempt), Pdet (detection), T (non-empty
        fraction), R (eligible/non-empty), C (successes per BS), qlen
        (mean end-of-slot queue length).
        """
        fields = {
            "P": ("n_success", "n_attempts"),
            "Pdet": ("detect_num", "detect_den"),
            "T": ("n_nonempty", "n_dev"),
            "R": ("n_eligible", "n_nonempty"),
            "C": ("n_success", "n_bs"),
            "qlen": ("sum_queue_len", "n_dev"),
        }
        if metric not in fields:
            raise KeyError(f"unknown metric {metric!r}")
        nums, dens = self._per_real(*fields[metric])
        pooled = nums.sum(axis=0) / np.where(dens.sum(axis=0) > 0, dens.sum(axis=0), np.nan)
        with np.errstate(invalid="ignore", divide="ignore"):
            per_real = nums / np.where(dens > 0, dens, np.nan)
        n_eff = np.sum(~np.isnan(per_real), axis=0)
        se = np.full(self.n_slots, np.nan)
        ok = n_eff >= 2
        if np.any(ok):
            se[ok] = np.nanstd(per_real[:, ok], axis=0, ddof=1) / np.sqrt(n_eff[ok])
        return pooled, se

    def queue_ecdf(self, slot: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(support, mean ECDF, se) of end-of-slot queue lengths at `slot`."""
        hists = []
        for r in self.realizations:
            h = r.tallies[slot - 1].queue_hist
            if h is None:
                raise ValueError("ensemble was run without collect_queue_hist")
            hists.append(h)
        width = max(h.size for h in hists)
        cdfs = []
        for h in hists:
            padded = np.zeros(width)
            padded[: h.size] = h
            cdfs.append(np.cumsum(padded) / padded.sum())
        cdfs = np.array(cdfs)
        mean = cdfs.mean(axis=0)
        se = cdfs.std(axis=0, ddof=1) / math.sqrt(len(cdfs)) if len(cdfs) > 1 else np.zeros(width)
        return np.arange(width), mean, se


def _run_one(args) -> RealizationResult:
    params, traffic, scheme, n_slots, side_m, child_seed, collect = args
    dep_ss, real_ss = child_seed.spawn(2)
    dep = sample_deployment(params, side_m, np.random.default_rng(dep_ss))
    return run_realization(dep, params, traffic, scheme, n_slots, real_ss, collect)


def run_ensemble(
    params: NetworkParams,
    traffic: TrafficProfile,
    scheme: SchemeConfig,
    n_slots: int,
    side_m: float,
    n_realizations: int,
    master_seed: int,
    jobs: int = 1,
    collect_queue_hist: bool = False,
) -> EnsembleResult:
    """Run independent realizations and pool their tallies.

    Results are bit-identical for a given (config, master_seed) at any
    `jobs` setting: realization seeds are derived up front and aggregation
    follows realization order.
    """
    if n_realizations < 2:
        raise ValueError("ensembles need at least 2 realizations for standard errors")
    children = np.random.SeedSequence(master_seed).spawn(n_realizations)
    work = [
        (params, traffic, scheme, n_slots, side_m, child, collect_queue_hist)
        for child in children
    ]
    result = EnsembleResult(n_slots=n_slots)
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            result.realizations = list(pool.map(_run_one, work))
    else:
        result.realizations = [_run_one(w) for w in work]
    return result
