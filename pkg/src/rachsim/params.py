"""Configuration parsing, unit conversion, and validation.

Every quantity crossing a module boundary is in SI-linear units: densities
in per-m^2, powers in linear mW, SINR thresholds as linear ratios, durations
in ms.  Config files (and CLI flags) use the customary units instead
(per-km^2, dBm, dB) and are converted exactly once, here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import yaml

# Constant of the gamma-type approximation to the area distribution of a
# planar Poisson-Voronoi cell; configurable per deployment model.
CELL_PMF_CONST = 3.575

PER_KM2_TO_PER_M2 = 1e-6


class ConfigError(ValueError):
    """Invalid or inconsistent configuration input."""


def dbm_to_mw(value_dbm: float) -> float:
    return 10.0 ** (value_dbm / 10.0)


def mw_to_dbm(value_mw: float) -> float:
    if value_mw <= 0:
        raise ConfigError(f"cannot express non-positive power {value_mw} mW in dBm")
    return 10.0 * math.log10(value_mw)


def db_to_linear(value_db: float) -> float:
    return 10.0 ** (value_db / 10.0)


def linear_to_db(ratio: float) -> float:
    if ratio <= 0:
        raise ConfigError(f"cannot express non-positive ratio {ratio} in dB")
    return 10.0 * math.log10(ratio)


@dataclass(frozen=True)
class NetworkParams:
    """Spatial densities, power control, and SINR threshold (linear units)."""

    lambda_b: float          # BS density, per m^2
    lambda_d: float          # device density over all preambles, per m^2
    xi: int                  # preamble pool size
    rho: float               # power-control received-power target, mW
    sigma2: float            # noise power, mW
    alpha: float             # path-loss exponent
    gamma_th: float          # SINR threshold, linear ratio
    c_const: float = CELL_PMF_CONST

    def __post_init__(self) -> None:
        if self.lambda_b <= 0:
            raise ConfigError(f"BS density must be positive, got {self.lambda_b}")
        if self.lambda_d <= 0:
            raise ConfigError(f"device density must be positive, got {self.lambda_d}")
        if self.xi < 1:
            raise ConfigError(f"preamble pool size must be >= 1, got {self.xi}")
        if self.alpha <= 2:
            # the inter-cell interference integral diverges at alpha <= 2
            raise ConfigError(f"path-loss exponent must exceed 2, got {self.alpha}")
        if self.gamma_th <= 0:
            raise ConfigError(f"SINR threshold must be positive, got {self.gamma_th}")
        if self.rho <= 0:
            raise ConfigError(f"power-control target must be positive, got {self.rho}")
        if self.sigma2 < 0:
            raise ConfigError(f"noise power must be non-negative, got {self.sigma2}")
        if self.c_const <= 0:
            raise ConfigError(f"cell PMF constant must be positive, got {self.c_const}")

    @property
    def lambda_dp(self) -> float:
        """Density of devices contending on one preamble, per m^2."""
        return self.lambda_d / self.xi

    def normalized(self) -> dict:
        return {
            "lambda_b_per_m2": self.lambda_b,
            "lambda_d_per_m2": self.lambda_d,
            "lambda_dp_per_m2": self.lambda_dp,
            "xi": self.xi,
            "rho_mw": self.rho,
            "sigma2_mw": self.sigma2,
            "alpha": self.alpha,
            "gamma_th": self.gamma_th,
            "c_const": self.c_const,
        }


@dataclass(frozen=True)
class TrafficProfile:
    """Per-slot Poisson arrival intensities derived from rates and slot length."""

    tau_c: float                      # contention (PRACH) duration, ms
    tau_g: float                      # gap duration until the next PRACH, ms
    eps_new: tuple[float, ...]        # arrival rate per slot, packets/ms

    def __post_init__(self) -> None:
        if self.tau_c < 0 or self.tau_g < 0:
            raise ConfigError("slot durations must be non-negative")
        if self.tau_c + self.tau_g <= 0:
            raise ConfigError("total slot duration must be positive")
        if not self.eps_new:
            raise ConfigError("traffic profile needs at least one slot")
        if any(e < 0 for e in self.eps_new):
            raise ConfigError("arrival rates must be non-negative")

    @property
    def slot_ms(self) -> float:
        return self.tau_c + self.tau_g

    @property
    def n_slots(self) -> int:
        return len(self.eps_new)

    @property
    def mu_new(self) -> tuple[float, ...]:
        """Mean new packets per device per slot."""
        return tuple(self.slot_ms * e for e in self.eps_new)

    def normalized(self) -> dict:
        return {
            "tau_c_ms": self.tau_c,
            "tau_g_ms": self.tau_g,
            "eps_new_per_ms": list(self.eps_new),
            "mu_new_per_slot": list(self.mu_new),
        }


BASELINE = "baseline"
ACB = "acb"
BACKOFF = "backoff"


@dataclass(frozen=True)
class SchemeConfig:
    """Access-control scheme gating each transmission attempt."""

    variant: str = BASELINE
    p_acb: float = 1.0       # per-slot pass probability (ACB)
    t_bo: int = 1            # deferral length in slots after a failure (back-off)

    def __post_init__(self) -> None:
        if self.variant not in (BASELINE, ACB, BACKOFF):
            raise ConfigError(f"unknown scheme variant {self.variant!r}")
        if self.variant == ACB and not (0.0 < self.p_acb <= 1.0):
            raise ConfigError(f"ACB factor must be in (0, 1], got {self.p_acb}")
        if self.variant == BACKOFF and self.t_bo < 1:
            raise ConfigError(f"back-off deferral must be >= 1 slot, got {self.t_bo}")

    @classmethod
    def baseline(cls) -> "SchemeConfig":
        return cls(BASELINE)

    @classmethod
    def acb(cls, p_acb: float) -> "SchemeConfig":
        return cls(ACB, p_acb=p_acb)

    @classmethod
    def backoff(cls, t_bo: int) -> "SchemeConfig":
        return cls(BACKOFF, t_bo=t_bo)

    @property
    def label(self) -> str:
        if self.variant == ACB:
            return f"acb({self.p_acb:g})"
        if self.variant == BACKOFF:
            return f"backoff({self.t_bo})"
        return BASELINE


@dataclass(frozen=True)
class SimBudget:
    """Monte Carlo budget: region side, realization count, master seed."""

    side_km: float = 5.0
    n_realizations: int = 20
    seed: int = 1
    n_slots: int | None = None    # defaults to the traffic profile length

    def __post_init__(self) -> None:
        if self.side_km <= 0:
            raise ConfigError("region side must be positive")
        if self.n_realizations < 1:
            raise ConfigError("need at least one realization")

    @property
    def side_m(self) -> float:
        return self.side_km * 1e3


@dataclass(frozen=True)
class Experiment:
    """A fully parsed experiment configuration."""

    network: NetworkParams
    traffic: TrafficProfile
    schemes: tuple[SchemeConfig, ...]
    sim: SimBudget
    sweep: dict = field(default_factory=dict)
    name: str = "experiment"

    def normalized(self) -> dict:
        return {
            "name": self.name,
            "network": self.network.normalized(),
            "traffic": self.traffic.normalized(),
            "schemes": [s.label for s in self.schemes],
            "sim": {
                "side_km": self.sim.side_km,
                "n_realizations": self.sim.n_realizations,
                "seed": self.sim.seed,
                "n_slots": self.sim.n_slots,
            },
            "sweep": dict(self.sweep),
        }


def _parse_scheme(entry) -> SchemeConfig:
    if isinstance(entry, str):
        if entry != BASELINE:
            raise ConfigError(f"scheme {entry!r} needs its parameter, e.g. {{variant: {entry}, ...}}")
        return SchemeConfig.baseline()
    if isinstance(entry, dict):
        variant = entry.get("variant")
        if variant == BASELINE:
            return SchemeConfig.baseline()
        if variant == ACB:
            if "p_acb" not in entry:
                raise ConfigError("ACB scheme requires p_acb")
            return SchemeConfig.acb(float(entry["p_acb"]))
        if variant == BACKOFF:
            if "t_bo" not in entry:
                raise ConfigError("back-off scheme requires t_bo")
            return SchemeConfig.backoff(int(entry["t_bo"]))
        raise ConfigError(f"unknown scheme variant {variant!r}")
    raise ConfigError(f"cannot parse scheme entry {entry!r}")


def _parse_network(raw: dict) -> NetworkParams:
    try:
        lambda_b = float(raw["lambda_b_per_km2"]) * PER_KM2_TO_PER_M2
    except KeyError as exc:
        raise ConfigError("network section requires lambda_b_per_km2") from exc

    xi = int(raw.get("xi", 1))
    if "lambda_dp_per_km2" in raw:
        if "lambda_d_per_km2" in raw:
            raise ConfigError("give lambda_dp_per_km2 or lambda_d_per_km2, not both")
        lambda_dp = float(raw["lambda_dp_per_km2"]) * PER_KM2_TO_PER_M2
        lambda_d = lambda_dp * xi
    elif "lambda_d_per_km2" in raw:
        lambda_d = float(raw["lambda_d_per_km2"]) * PER_KM2_TO_PER_M2
    else:
        raise ConfigError("network section requires lambda_dp_per_km2 or lambda_d_per_km2")

    return NetworkParams(
        lambda_b=lambda_b,
        lambda_d=lambda_d,
        xi=xi,
        rho=dbm_to_mw(float(raw.get("rho_dbm", -90.0))),
        sigma2=dbm_to_mw(float(raw["sigma2_dbm"])) if "sigma2_dbm" in raw else 0.0,
        alpha=float(raw.get("alpha", 4.0)),
        gamma_th=db_to_linear(float(raw.get("gamma_th_db", -10.0))),
        c_const=float(raw.get("c_const", CELL_PMF_CONST)),
    )


def _parse_traffic(raw: dict) -> TrafficProfile:
    tau_c = float(raw.get("tau_c_ms", 1.0))
    tau_g = float(raw.get("tau_g_ms", 0.0))
    n_slots = int(raw.get("n_slots", 1))
    if n_slots < 1:
        raise ConfigError("n_slots must be >= 1")
    eps = raw.get("eps_new_per_ms", 0.1)
    if isinstance(eps, Sequence) and not isinstance(eps, str):
        eps_new = tuple(float(e) for e in eps)
        if len(eps_new) != n_slots:
            raise ConfigError(
                f"eps_new_per_ms lists {len(eps_new)} slots but n_slots={n_slots}"
            )
    else:
        eps_new = (float(eps),) * n_slots
    return TrafficProfile(tau_c=tau_c, tau_g=tau_g, eps_new=eps_new)


def from_config(raw: dict, name: str = "experiment") -> Experiment:
    """Validate a raw config mapping and convert it to linear units."""

    if not isinstance(raw, dict):
        raise ConfigError("config root must be a mapping")
    unknown = set(raw) - {"network", "traffic", "schemes", "sim", "sweep", "name"}
    if unknown:
        raise ConfigError(f"unknown config sections: {sorted(unknown)}")

    network = _parse_network(raw.get("network", {}))
    traffic = _parse_traffic(raw.get("traffic", {}))
    schemes = tuple(_parse_scheme(s) for s in raw.get("schemes", [BASELINE]))
    if not schemes:
        raise ConfigError("at least one scheme is required")

    sim_raw = raw.get("sim", {})
    sim = SimBudget(
        side_km=float(sim_raw.get("side_km", 5.0)),
        n_realizations=int(sim_raw.get("n_realizations", 20)),
        seed=int(sim_raw.get("seed", 1)),
        n_slots=int(sim_raw["n_slots"]) if "n_slots" in sim_raw else None,
    )

    return Experiment(
        network=network,
        traffic=traffic,
        schemes=schemes,
        sim=sim,
        sweep=dict(raw.get("sweep", {})),
        name=str(raw.get("name", name)),
    )


def bundled_config_path(name: str) -> Path:
    """Resolve a bundled config by bare name (e.g. 'fig4')."""
    path = Path(__file__).parent / "configs" / f"{name}.yaml"
    if not path.exists():
        available = sorted(p.stem for p in (Path(__file__).parent / "configs").glob("*.yaml"))
        raise ConfigError(f"no bundled config {name!r}; available: {available}")
    return path


def load_config(source: str | Path, overrides: dict | None = None) -> Experiment:
    """Load an experiment config from a YAML file path or bundled name.

    `overrides` is a flat mapping of dotted keys ("network.gamma_th_db")
    applied on top of the file contents before validation.
    """

    path = Path(source)
    if not path.exists() and not str(source).endswith(".yaml"):
        path = bundled_config_path(str(source))
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    with open(path, "r", encoding="utf-8") as fh:
        raw = yaml.safe_load(fh) or {}
    if overrides:
        raw = apply_overrides(raw, overrides)
    return from_config(raw, name=raw.get("name", path.stem))


def _deep_merge(base: dict, extra: dict) -> None:
    for key, value in extra.items():
        if isinstance(value, dict) and isinstance(base.get(key), dict):
            _deep_merge(base[key], value)
        else:
            base[key] = value


def apply_overrides(raw: dict, overrides: dict) -> dict:
    """Return a copy of `raw` with overrides applied.

    Keys may be dotted paths ("network.gamma_th_db"); mapping values are
    merged into the existing section rather than replacing it.
    """
    import copy

    result = copy.deepcopy(raw)
    for dotted, value in overrides.items():
        parts = dotted.split(".")
        node = result
        for part in parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ConfigError(f"cannot override {dotted}: {part} is not a mapping")
        last = parts[-1]
        if isinstance(value, dict) and isinstance(node.get(last), dict):
            _deep_merge(node[last], value)
        else:
            node[last] = value
    return result
