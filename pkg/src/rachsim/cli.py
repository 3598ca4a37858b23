"""Command-line entry point.

Subcommands: analyze (single-slot sweeps), evolve (multi-slot traces),
simulate (Monte Carlo estimates), compare (analysis vs simulation tables),
pmf (exact vs Poisson backlog CDFs), optimal-density.  All outputs are
written atomically; every run leaves a manifest echoing the effective
parameters.  Exit codes: 0 success, 1 validation error, 2 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__, analysis, queueing
from . import experiments as experiments_mod
from . import sim as sim_mod
from .kernels import KERNEL_NAME
from .output import write_csv_atomic, write_manifest
from .params import ConfigError, Experiment, load_config

OUTDIR_ENV = "RACHSIM_OUT"

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NUMERIC = 2


class _Parser(argparse.ArgumentParser):
    # argparse defaults to exit code 2 on usage errors; 2 is reserved for
    # numeric failures here, so report usage problems as validation errors
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_CONFIG)


def _parse_override(text: str) -> tuple[str, object]:
    if "=" not in text:
        raise ConfigError(f"override must look like section.key=value, got {text!r}")
    key, raw = text.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key, value


def _outdir(args) -> Path:
    if getattr(args, "out_dir", None):
        return Path(args.out_dir)
    return Path(os.environ.get(OUTDIR_ENV, "."))


def _load(args) -> Experiment:
    overrides = dict(_parse_override(s) for s in (args.set or []))
    cfg = load_config(args.config, overrides)
    if args.print_normalized:
        print(json.dumps(cfg.normalized(), indent=2, sort_keys=True))
    return cfg


def _manifest_payload(args, cfg: Experiment, extra: dict | None = None) -> dict:
    payload = {
        "command": args.command,
        "tool_version": __version__,
        "kernel": KERNEL_NAME,
        "config": cfg.normalized(),
        "overrides": list(args.set or []),
    }
    if extra:
        payload.update(extra)
    return payload


def _sweep_values(cfg: Experiment, args) -> tuple[str, list[float]]:
    sweep = dict(cfg.sweep)
    if getattr(args, "sweep", None):
        sweep["variable"] = args.sweep
    if getattr(args, "grid", None):
        sweep["values"] = [float(v) for v in args.grid.split(",")]
    variable = sweep.get("variable", "gamma_th_db")
    if variable not in ("gamma_th_db", "ratio", "lambda_b_per_km2"):
        raise ConfigError(f"unknown sweep variable {variable!r}")
    if "values" in sweep:
        values = [float(v) for v in sweep["values"]]
    else:
        values = list(
            np.linspace(
                float(sweep.get("start", -40.0)),
                float(sweep.get("stop", 0.0)),
                int(sweep.get("count", 41)),
            )
        )
    if not values:
        raise ConfigError("sweep grid is empty")
    return variable, values


def _network_at(cfg: Experiment, variable: str, value: float):
    from .params import NetworkParams

    n = cfg.network
    kwargs = dict(
        lambda_b=n.lambda_b, lambda_d=n.lambda_d, xi=n.xi, rho=n.rho,
        sigma2=n.sigma2, alpha=n.alpha, gamma_th=n.gamma_th, c_const=n.c_const,
    )
    if variable == "gamma_th_db":
        kwargs["gamma_th"] = 10.0 ** (value / 10.0)
    elif variable == "ratio":
        kwargs["lambda_d"] = value * n.lambda_b * n.xi
    elif variable == "lambda_b_per_km2":
        kwargs["lambda_b"] = value * 1e-6
    return NetworkParams(**kwargs)


def cmd_analyze(args) -> int:
    cfg = _load(args)
    variable, values = _sweep_values(cfg, args)
    scheme = cfg.schemes[0]
    mu1 = cfg.traffic.mu_new[0]
    t1 = 1.0 - math.exp(-mu1)
    r1 = scheme.p_acb if scheme.variant == "acb" else 1.0

    header = ["sweep_var", "T", "R", "P", "P_det", "C", "lambda_B_star"]
    if args.lemma3_closed_form:
        header.append("P_det_closed_form")
    rows = []
    for value in values:
        net = _network_at(cfg, variable, value)
        act = analysis.ActivityState.for_network(t1, r1, net)
        row = [
            value,
            t1,
            r1,
            analysis.preamble_success(act, net),
            analysis.preamble_detection(act, net),
            analysis.received_packets_per_bs(act, net),
            analysis.optimal_bs_density(act, net),
        ]
        if args.lemma3_closed_form:
            row.append(analysis.preamble_detection_closed_form(act, net))
        rows.append(row)

    out = _outdir(args) / (args.out or f"{cfg.name}_analyze.csv")
    write_csv_atomic(out, header, rows)
    write_manifest(
        out.with_suffix(".manifest.json"),
        _manifest_payload(args, cfg, {"sweep_variable": variable, "n_points": len(values)}),
    )
    print(f"wrote {out}")
    return EXIT_OK


def cmd_evolve(args) -> int:
    cfg = _load(args)
    n_slots = args.slots or cfg.sim.n_slots or cfg.traffic.n_slots
    reading = (
        queueing.BACKOFF_CONDITIONAL
        if args.backoff_reading == "conditional"
        else queueing.BACKOFF_PRINTED
    )
    rows = []
    for scheme in cfg.schemes:
        trace = queueing.evolve(cfg.network, cfg.traffic, scheme, n_slots, backoff_reading=reading)
        for s in trace.slots:
            rows.append(
                [scheme.label, s.m, s.mu_new, s.mu_cum, s.activity.t_nonempty,
                 s.activity.r_nonrestrict, s.p_success, s.c_received, s.q_len]
            )
    out = _outdir(args) / (args.out or f"{cfg.name}_evolve.csv")
    write_csv_atomic(out, ["scheme", "m", "mu_new", "mu_cum", "T", "R", "P", "C", "EQ"], rows)
    write_manifest(
        out.with_suffix(".manifest.json"),
        _manifest_payload(args, cfg, {"n_slots": n_slots, "backoff_reading": reading}),
    )
    print(f"wrote {out}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    cfg = _load(args)
    n_slots = args.slots or cfg.sim.n_slots or cfg.traffic.n_slots
    seed = args.seed if args.seed is not None else cfg.sim.seed
    n_real = args.realizations or cfg.sim.n_realizations
    side_m = (args.side_km or cfg.sim.side_km) * 1e3

    header = ["scheme", "m"]
    metrics = ["T", "R", "P", "Pdet", "C", "qlen"]
    for m in metrics:
        header += [f"{m}_hat", f"{m}_se"]
    header += ["attempts", "successes"]
    rows = []
    for scheme in cfg.schemes:
        ens = sim_mod.run_ensemble(
            cfg.network, cfg.traffic, scheme, n_slots, side_m, n_real, seed, jobs=args.jobs
        )
        estimates = {m: ens.estimate(m) for m in metrics}
        attempts = np.sum(
            [[t.n_attempts for t in r.tallies] for r in ens.realizations], axis=0
        )
        successes = np.sum(
            [[t.n_success for t in r.tallies] for r in ens.realizations], axis=0
        )
        for slot in range(1, n_slots + 1):
            row = [scheme.label, slot]
            for m in metrics:
                pooled, se = estimates[m]
                row += [float(pooled[slot - 1]), float(se[slot - 1])]
            row += [int(attempts[slot - 1]), int(successes[slot - 1])]
            rows.append(row)

    out = _outdir(args) / (args.out or f"{cfg.name}_simulate.csv")
    write_csv_atomic(out, header, rows)
    write_manifest(
        out.with_suffix(".manifest.json"),
        _manifest_payload(
            args, cfg,
            {"seed": seed, "n_realizations": n_real, "side_m": side_m, "n_slots": n_slots},
        ),
    )
    print(f"wrote {out}")
    return EXIT_OK


def cmd_pmf(args) -> int:
    cfg = _load(args)
    if cfg.traffic.n_slots < 2:
        raise ConfigError("backlog CDF tables need a traffic profile of >= 2 slots")
    scheme = cfg.schemes[0]
    trace = queueing.evolve(cfg.network, cfg.traffic, scheme, min(3, cfg.traffic.n_slots))
    s1 = trace.slots[0]
    pmf2 = queueing.exact_pmf_slot2(s1.mu_new, s1.activity.r_nonrestrict, s1.p_success)
    tables = [(2, pmf2, trace.slots[1].mu_cum)]
    if len(trace.slots) >= 3:
        s2 = trace.slots[1]
        pmf3 = queueing.exact_pmf_slot3(pmf2, s2.mu_new, s2.activity.r_nonrestrict, s2.p_success)
        tables.append((3, pmf3, trace.slots[2].mu_cum))
    rows = []
    for slot, pmf, mu_cum in tables:
        exact = pmf.cdf_grid()
        cut = int(np.searchsorted(exact, 1.0 - 1e-9)) + 1
        for y in range(min(cut, exact.size)):
            rows.append(
                [scheme.label, slot, y, float(exact[y]), queueing.poisson_approx_cdf(mu_cum, y)]
            )
    out = _outdir(args) / (args.out or f"{cfg.name}_pmf.csv")
    write_csv_atomic(out, ["scheme", "slot", "y", "cdf_exact", "cdf_poisson"], rows)
    write_manifest(out.with_suffix(".manifest.json"), _manifest_payload(args, cfg))
    print(f"wrote {out}")
    return EXIT_OK


def cmd_optimal_density(args) -> int:
    cfg = _load(args)
    variable, values = _sweep_values(cfg, args)
    if variable != "gamma_th_db":
        raise ConfigError("optimal-density sweeps gamma_th_db only")
    scheme = cfg.schemes[0]
    mu1 = cfg.traffic.mu_new[0]
    t1 = 1.0 - math.exp(-mu1)
    r1 = scheme.p_acb if scheme.variant == "acb" else 1.0
    rows = []
    for value in values:
        net = _network_at(cfg, variable, value)
        act = analysis.ActivityState.for_network(t1, r1, net)
        star = analysis.optimal_bs_density(act, net)
        rows.append([value, star, star * 1e6])
    out = _outdir(args) / (args.out or f"{cfg.name}_optimal.csv")
    write_csv_atomic(out, ["gamma_th_db", "lambda_b_star_per_m2", "lambda_b_star_per_km2"], rows)
    write_manifest(out.with_suffix(".manifest.json"), _manifest_payload(args, cfg))
    print(f"wrote {out}")
    return EXIT_OK


def cmd_compare(args) -> int:
    registry = experiments_mod.bundled_experiments()
    name = Path(args.config).stem
    if name not in registry:
        raise ConfigError(f"unknown experiment {name!r}; available: {sorted(registry)}")
    spec = registry[name]
    result = experiments_mod.run_experiment(
        spec,
        seed=args.seed,
        jobs=args.jobs,
        n_realizations=args.realizations,
        side_km=args.side_km,
    )
    exp_dir = experiments_mod.write_experiment_outputs(result, _outdir(args), args.seed)
    print(f"wrote {exp_dir} ({len(result.rows)} rows, {result.n_failed} failed)")
    return EXIT_OK


def build_parser() -> _Parser:
    parser = _Parser(prog="rachsim", description=__doc__)
    parser.add_argument("--version", action="version", version=f"rachsim {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument(
            "--config", required=True,
            help="path to a YAML config, or a bundled name (fig3..fig10)",
        )
        p.add_argument(
            "--set", action="append", metavar="KEY=VALUE",
            help="override a config entry, e.g. --set network.gamma_th_db=-5",
        )
        p.add_argument("--print-normalized", action="store_true",
                       help="dump the validated linear-unit parameter set")
        p.add_argument("--out-dir", help=f"output directory (default ${OUTDIR_ENV} or .)")

    p = sub.add_parser("analyze", help="single-slot closed-form sweep")
    common(p)
    p.add_argument("--sweep", choices=["gamma_th_db", "ratio", "lambda_b_per_km2"])
    p.add_argument("--grid", help="comma-separated sweep values")
    p.add_argument("--lemma3-closed-form", action="store_true",
                   help="also emit the printed closed-form detection variant")
    p.add_argument("--out")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("evolve", help="multi-slot analytical traces per scheme")
    common(p)
    p.add_argument("--slots", type=int)
    p.add_argument("--backoff-reading", choices=["printed", "conditional"], default="printed")
    p.add_argument("--out")
    p.set_defaults(func=cmd_evolve)

    p = sub.add_parser("simulate", help="Monte Carlo per-slot estimates")
    common(p)
    p.add_argument("--slots", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--realizations", type=int)
    p.add_argument("--side-km", type=float)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("compare", help="bundled analysis-vs-simulation experiment")
    p.add_argument("--config", required=True,
                   help="bundled experiment name (fig3..fig10)")
    p.add_argument("--seed", type=int)
    p.add_argument("--realizations", type=int)
    p.add_argument("--side-km", type=float)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out-dir", help=f"output directory (default ${OUTDIR_ENV} or .)")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("pmf", help="exact vs Poisson backlog CDF tables (slots 2-3)")
    common(p)
    p.add_argument("--out")
    p.set_defaults(func=cmd_pmf)

    p = sub.add_parser("optimal-density", help="closed-form optimal BS density")
    common(p)
    p.add_argument("--sweep", choices=["gamma_th_db"])
    p.add_argument("--grid", help="comma-separated gamma values in dB")
    p.add_argument("--out")
    p.set_defaults(func=cmd_optimal_density)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"rachsim: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except analysis.NumericError as exc:
        print(f"rachsim: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"rachsim: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
