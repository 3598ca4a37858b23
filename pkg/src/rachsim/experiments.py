"""Experiment runner: matched analysis vs. simulation comparisons.

Each bundled experiment sweeps a grid of parameter overrides over a base
config, evolves the analytical traces, runs the matching Monte Carlo
ensembles, and joins both into a comparison table with a pass/fail
verdict per (grid point, scheme, slot, metric) at the configured
tolerance |analytical - simulated| <= max(abs_tol, z * se).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.stats import poisson

from . import __version__, analysis, queueing, sim
from .kernels import KERNEL_NAME
from .output import write_csv_atomic, write_manifest
from .params import BACKOFF, Experiment, load_config

COMPARISON_HEADER = (
    "experiment",
    "label",
    "scheme",
    "slot",
    "metric",
    "analytical",
    "simulated",
    "se",
    "abs_tol",
    "z",
    "passed",
)

CDF_HEADER = (
    "label",
    "scheme",
    "slot",
    "y",
    "cdf_exact",
    "cdf_poisson",
    "cdf_sim",
    "cdf_sim_se",
)

ORDERING_HEADER = (
    "label",
    "slot",
    "better",
    "worse",
    "p_better_ana",
    "p_worse_ana",
    "ana_ok",
    "p_better_sim",
    "p_worse_sim",
    "se_pair",
    "sim_ok",
)

BACKOFF_HEADER = (
    "label",
    "slot",
    "r_printed",
    "r_conditional",
    "r_hat",
    "r_hat_se",
)


@dataclass(frozen=True)
class GridPoint:
    """One sweep point: a label plus dotted-key config overrides."""

    label: str
    overrides: dict


@dataclass(frozen=True)
class ExperimentSpec:
    """A bundled analysis-vs-simulation comparison."""

    name: str
    description: str
    config: str                       # bundled config name
    grid: tuple[GridPoint, ...]
    metrics: tuple[str, ...]          # P, T, R, C, EQ, Pdet, mean_P, mean_C
    slots: tuple[int, ...] | None = None
    cdf_slots: tuple[int, ...] = ()
    ordering: tuple[str, ...] = ()    # expected scheme order, best first
    ordering_slots: tuple[int, ...] = ()
    backoff_report: bool = False
    abs_tol: float = 0.02
    z: float = 3.0

    def __post_init__(self) -> None:
        if not self.grid:
            raise ValueError(f"experiment {self.name} has an empty grid")


@dataclass
class ComparisonRow:
    experiment: str
    label: str
    scheme: str
    slot: str
    metric: str
    analytical: float
    simulated: float
    se: float
    abs_tol: float
    z: float

    @property
    def passed(self) -> bool:
        tol = max(self.abs_tol, self.z * self.se) if math.isfinite(self.se) else self.abs_tol
        return abs(self.analytical - self.simulated) <= tol

    def as_tuple(self) -> tuple:
        return (
            self.experiment,
            self.label,
            self.scheme,
            self.slot,
            self.metric,
            self.analytical,
            self.simulated,
            self.se,
            self.abs_tol,
            self.z,
            self.passed,
        )


@dataclass
class OrderingReport:
    ordered: list[str]
    violations: list[tuple[str, str, float]]

    @property
    def ok(self) -> bool:
        return not self.violations


def scheme_ordering_check(
    values: dict[str, float],
    expected: Sequence[str],
    ses: dict[str, float] | None = None,
    z: float = 3.0,
) -> OrderingReport:
    """Check that metric values respect an expected best-to-worst order.

    Without standard errors the check is deterministic and ties are fine;
    with them a pair only counts as violated when the deficit exceeds z
    combined standard errors.
    """
    missing = [s for s in expected if s not in values]
    if missing:
        raise KeyError(f"missing schemes in ordering check: {missing}")
    ordered = sorted(expected, key=lambda s: values[s], reverse=True)
    violations = []
    for hi, lo in zip(expected, expected[1:]):
        deficit = values[lo] - values[hi]
        margin = 0.0
        if ses is not None:
            margin = z * math.hypot(ses.get(hi, 0.0), ses.get(lo, 0.0))
        if deficit > margin:
            violations.append((hi, lo, deficit))
    return OrderingReport(ordered=ordered, violations=violations)


def _analytical_metric(trace: queueing.SchemeTrace, metric: str, slot: int) -> float:
    s = trace.slots[slot - 1]
    return {
        "P": s.p_success,
        "Pdet": s.p_detect,
        "T": s.activity.t_nonempty,
        "R": s.activity.r_nonrestrict,
        "C": s.c_received,
        "EQ": s.q_len,
    }[metric]


_SIM_METRIC = {"P": "P", "Pdet": "Pdet", "T": "T", "R": "R", "C": "C", "EQ": "qlen"}


@dataclass
class ExperimentResult:
    spec: ExperimentSpec
    rows: list[ComparisonRow] = field(default_factory=list)
    cdf_rows: list[tuple] = field(default_factory=list)
    ordering_rows: list[tuple] = field(default_factory=list)
    backoff_rows: list[tuple] = field(default_factory=list)
    configs: list[Experiment] = field(default_factory=list)

    @property
    def n_failed(self) -> int:
        return sum(1 for r in self.rows if not r.passed)


def run_experiment(
    spec: ExperimentSpec,
    seed: int | None = None,
    jobs: int = 1,
    n_realizations: int | None = None,
    side_km: float | None = None,
) -> ExperimentResult:
    """Run every grid point of the experiment; deterministic given seed."""
    result = ExperimentResult(spec=spec)
    for point in spec.grid:
        cfg = load_config(spec.config, overrides=point.overrides)
        result.configs.append(cfg)
        budget_seed = seed if seed is not None else cfg.sim.seed
        budget_real = n_realizations if n_realizations is not None else cfg.sim.n_realizations
        budget_side = (side_km if side_km is not None else cfg.sim.side_km) * 1e3
        n_slots = cfg.sim.n_slots or cfg.traffic.n_slots
        slots = spec.slots or tuple(range(1, n_slots + 1))
        collect_hist = bool(spec.cdf_slots)

        traces: dict[str, queueing.SchemeTrace] = {}
        ensembles: dict[str, sim.EnsembleResult] = {}
        for scheme in cfg.schemes:
            try:
                traces[scheme.label] = queueing.evolve(cfg.network, cfg.traffic, scheme, n_slots)
                ensembles[scheme.label] = sim.run_ensemble(
                    cfg.network,
                    cfg.traffic,
                    scheme,
                    n_slots,
                    budget_side,
                    budget_real,
                    budget_seed,
                    jobs=jobs,
                    collect_queue_hist=collect_hist,
                )
            except (analysis.NumericError, ArithmeticError) as exc:
                raise analysis.NumericError(
                    f"{spec.name}[{point.label}, {scheme.label}]: {exc}"
                ) from exc

        for scheme in cfg.schemes:
            trace = traces[scheme.label]
            ens = ensembles[scheme.label]
            estimates = {m: ens.estimate(_SIM_METRIC[m]) for m in _SIM_METRIC if m in spec.metrics}
            for metric in spec.metrics:
                if metric in ("mean_P", "mean_C"):
                    mean_p, mean_c = queueing.trace_means(trace)
                    ana = mean_p if metric == "mean_P" else mean_c
                    sim_key = "P" if metric == "mean_P" else "C"
                    pooled, se = ens.estimate(sim_key)
                    sim_val = float(np.nanmean(pooled))
                    sim_se = float(np.sqrt(np.nansum(se**2)) / np.count_nonzero(~np.isnan(se)))
                    result.rows.append(
                        ComparisonRow(
                            spec.name, point.label, scheme.label, "mean", metric,
                            ana, sim_val, sim_se, spec.abs_tol, spec.z,
                        )
                    )
                    continue
                pooled, se = estimates[metric]
                for slot in slots:
                    result.rows.append(
                        ComparisonRow(
                            spec.name, point.label, scheme.label, str(slot), metric,
                            _analytical_metric(trace, metric, slot),
                            float(pooled[slot - 1]),
                            float(se[slot - 1]),
                            spec.abs_tol, spec.z,
                        )
                    )

            for cdf_slot in spec.cdf_slots:
                result.cdf_rows.extend(
                    _cdf_rows(point.label, scheme.label, cdf_slot, trace, ens)
                )

        if spec.ordering:
            result.ordering_rows.extend(
                _ordering_rows(point.label, spec, traces, ensembles)
            )
        if spec.backoff_report:
            result.backoff_rows.extend(
                _backoff_rows(point.label, cfg, n_slots, ensembles)
            )
    return result


def _cdf_rows(
    label: str,
    scheme_label: str,
    slot: int,
    trace: queueing.SchemeTrace,
    ens: sim.EnsembleResult,
) -> list[tuple]:
    if slot not in (2, 3):
        raise ValueError("exact backlog CDFs exist for slots 2 and 3 only")
    s1 = trace.slots[0]
    pmf2 = queueing.exact_pmf_slot2(s1.mu_new, s1.activity.r_nonrestrict, s1.p_success)
    if slot == 2:
        pmf = pmf2
    else:
        s2 = trace.slots[1]
        pmf = queueing.exact_pmf_slot3(pmf2, s2.mu_new, s2.activity.r_nonrestrict, s2.p_success)
    mu_cum = trace.slots[slot - 1].mu_cum
    # backlog entering `slot` is the queue left at the end of slot-1
    ys, ecdf, ecdf_se = ens.queue_ecdf(slot - 1)
    width = max(pmf.support.size, ys.size)
    exact = np.ones(width)
    exact[: pmf.support.size] = pmf.cdf_grid()
    exact[pmf.support.size :] = exact[pmf.support.size - 1]
    approx = poisson.cdf(np.arange(width), mu_cum)
    sim_cdf = np.ones(width)
    sim_cdf[: ys.size] = ecdf
    sim_se = np.zeros(width)
    sim_se[: ys.size] = ecdf_se
    rows = []
    for y in range(width):
        rows.append(
            (label, scheme_label, slot, y, float(exact[y]), float(approx[y]),
             float(sim_cdf[y]), float(sim_se[y]))
        )
    return rows


def _ordering_rows(
    label: str,
    spec: ExperimentSpec,
    traces: dict[str, queueing.SchemeTrace],
    ensembles: dict[str, sim.EnsembleResult],
) -> list[tuple]:
    rows = []
    sim_p = {lab: ens.estimate("P") for lab, ens in ensembles.items()}
    slots = spec.ordering_slots or tuple(range(2, len(next(iter(traces.values())).slots) + 1))
    for slot in slots:
        ana = {lab: traces[lab].slots[slot - 1].p_success for lab in spec.ordering}
        for hi, lo in zip(spec.ordering, spec.ordering[1:]):
            p_hi, p_lo = ana[hi], ana[lo]
            s_hi, se_hi = sim_p[hi]
            s_lo, se_lo = sim_p[lo]
            se_pair = math.hypot(se_hi[slot - 1], se_lo[slot - 1])
            rows.append(
                (
                    label, slot, hi, lo,
                    p_hi, p_lo, p_hi >= p_lo,
                    float(s_hi[slot - 1]), float(s_lo[slot - 1]), se_pair,
                    float(s_hi[slot - 1]) >= float(s_lo[slot - 1]) - spec.z * se_pair,
                )
            )
    return rows


def _backoff_rows(
    label: str,
    cfg: Experiment,
    n_slots: int,
    ensembles: dict[str, sim.EnsembleResult],
) -> list[tuple]:
    rows = []
    for scheme in cfg.schemes:
        if scheme.variant != BACKOFF:
            continue
        printed = queueing.evolve(
            cfg.network, cfg.traffic, scheme, n_slots,
            backoff_reading=queueing.BACKOFF_PRINTED,
        )
        conditional = queueing.evolve(
            cfg.network, cfg.traffic, scheme, n_slots,
            backoff_reading=queueing.BACKOFF_CONDITIONAL,
        )
        r_hat, r_se = ensembles[scheme.label].estimate("R")
        for slot in range(1, n_slots + 1):
            rows.append(
                (
                    label, slot,
                    printed.slots[slot - 1].activity.r_nonrestrict,
                    conditional.slots[slot - 1].activity.r_nonrestrict,
                    float(r_hat[slot - 1]), float(r_se[slot - 1]),
                )
            )
    return rows


def write_experiment_outputs(result: ExperimentResult, outdir: Path, seed: int | None) -> Path:
    """Write comparison.csv (+ side tables) and a manifest; returns the directory."""
    spec = result.spec
    exp_dir = Path(outdir) / spec.name
    write_csv_atomic(
        exp_dir / "comparison.csv", COMPARISON_HEADER, [r.as_tuple() for r in result.rows]
    )
    if result.cdf_rows:
        write_csv_atomic(exp_dir / "cdf.csv", CDF_HEADER, result.cdf_rows)
    if result.ordering_rows:
        write_csv_atomic(exp_dir / "ordering.csv", ORDERING_HEADER, result.ordering_rows)
    if result.backoff_rows:
        write_csv_atomic(exp_dir / "backoff_readings.csv", BACKOFF_HEADER, result.backoff_rows)
    write_manifest(
        exp_dir / "manifest.json",
        {
            "experiment": spec.name,
            "description": spec.description,
            "seed": seed,
            "tool_version": __version__,
            "kernel": KERNEL_NAME,
            "grid": [p.label for p in spec.grid],
            "configs": [c.normalized() for c in result.configs],
            "rows": len(result.rows),
            "failed_rows": result.n_failed,
        },
    )
    return exp_dir


def _gamma_grid(values: Sequence[float]) -> tuple[GridPoint, ...]:
    return tuple(
        GridPoint(f"gamma_db={g:g}", {"network": {"gamma_th_db": float(g)}}) for g in values
    )


def bundled_experiments() -> dict[str, ExperimentSpec]:
    """Registry of the shipped figure-style experiments."""
    specs = [
        ExperimentSpec(
            name="fig3",
            description="single-slot success and detection probability vs SINR threshold",
            config="fig3",
            grid=_gamma_grid(np.linspace(-40.0, 0.0, 41)),
            metrics=("P", "Pdet"),
            slots=(1,),
            abs_tol=0.02,
        ),
        ExperimentSpec(
            name="fig4",
            description="backlog CDFs: exact statistics vs Poisson surrogate vs simulation",
            config="fig4",
            grid=tuple(
                GridPoint(f"tau_ms={tau:g}", {"traffic": {"tau_g_ms": float(tau - 1)}})
                for tau in (1, 3, 5, 10, 15, 20)
            ),
            metrics=("T", "P"),
            slots=(1, 2, 3),
            cdf_slots=(2, 3),
        ),
        ExperimentSpec(
            name="fig5",
            description="single-slot success probability vs device/BS density ratio",
            config="fig5",
            grid=tuple(
                GridPoint(
                    f"ratio={ratio:g}|alpha={alpha:g}|tau_ms={tau:g}",
                    {
                        "network": {"lambda_dp_per_km2": float(10 * ratio), "alpha": float(alpha)},
                        "traffic": {"tau_g_ms": float(tau - 1)},
                    },
                )
                for alpha in (3.0, 4.0)
                for tau in (1.0, 5.0)
                for ratio in (1, 2, 5, 10, 20, 50)
            ),
            metrics=("P",),
            slots=(1,),
        ),
        ExperimentSpec(
            name="fig6",
            description="received packets per BS vs BS density, with the closed-form optimum",
            config="fig6",
            grid=tuple(
                GridPoint(
                    f"lambda_b={lb:g}|gamma_db={g:g}",
                    {
                        "network": {"lambda_b_per_km2": float(lb), "gamma_th_db": float(g)},
                        "sim": {"side_km": float(min(6.0, max(2.0, math.sqrt(60.0 / lb))))},
                    },
                )
                for g in (-10.0, -5.0)
                for lb in (2, 5, 10, 20, 50)
            ),
            metrics=("C",),
            slots=(1,),
            # C = load * P is not a probability; its scale is the per-cell
            # load (up to ~10 here), so the probability-level 0.02 cushion
            # maps to 0.2
            abs_tol=0.2,
        ),
        ExperimentSpec(
            name="fig7",
            description="per-slot success probability of the four access schemes",
            config="fig7",
            grid=_gamma_grid([-10.0, -5.0]),
            metrics=("P",),
            ordering=("acb(0.5)", "backoff(1)", "acb(0.9)", "baseline"),
            ordering_slots=tuple(range(2, 11)),
            backoff_report=True,
        ),
        ExperimentSpec(
            name="fig8",
            description="per-slot mean queue length of the four access schemes",
            config="fig7",
            grid=_gamma_grid([-10.0]),
            metrics=("EQ",),
            abs_tol=0.05,
        ),
        ExperimentSpec(
            name="fig9",
            description="recovery after a 10-slot traffic burst",
            config="fig9",
            grid=_gamma_grid([-8.0, -6.0]),
            metrics=("P",),
        ),
        ExperimentSpec(
            name="fig10",
            description="means of success probability and received packets over 10 slots",
            config="fig10",
            grid=_gamma_grid([-40.0, -35.0, -30.0, -25.0, -20.0, -15.0, -10.0, -5.0]),
            metrics=("mean_P", "mean_C"),
        ),
    ]
    return {s.name: s for s in specs}
