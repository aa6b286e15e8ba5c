"""Strict JSON run-configuration schema for the command-line harness.

Physical parameters (alpha, p_e, c, the penalty, the budget) must be explicit;
only tolerances and simulation bookkeeping carry engineering defaults.
Unknown keys anywhere are rejected so typos cannot silently fall back to a
default.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .errors import ConfigError
from .lagrangian import SeriesConfig
from .model import ChannelModel, PenaltySpec, SourceModel
from .rvi import RviConfig

_OUTPUT_KEYS = ("solve", "sweep", "simulate", "validate", "wait_aoii")


@dataclass(frozen=True)
class SolverSettings:
    epsilon: float = 1e-12
    weighted_epsilon: float = 1e-10
    l_cap: int = 1_000_000
    lambda_tol: float = 1e-6
    tail_tol: float = 1e-12

    def series_config(self) -> SeriesConfig:
        return SeriesConfig(self.epsilon, self.weighted_epsilon, self.l_cap)


@dataclass(frozen=True)
class SimSettings:
    horizon: int = 100_000
    seed: int = 0
    n_reps: int = 1


@dataclass(frozen=True)
class ValidateSettings:
    """Controls for the cross-oracle validation suite.

    gamma_perturb is a test hook: it scales the decoding-failure probability
    seen by the closed-form side by (1 + gamma_perturb), so a nonzero value
    must make the threshold cross-check report a mismatch.
    """

    lambdas: tuple[float, ...] = (0.0, 1.0, 5.0)
    thresholds: tuple[int, ...] = (1, 2, 5)
    delta_max: int = 400
    r_cap: int = 64
    span_tol: float = 1e-10
    max_iters: int = 100_000
    gamma_perturb: float = 0.0

    def rvi_config(self, channel) -> RviConfig:
        r_cap = self.r_cap
        if channel.round_length is not None:
            r_cap = max(r_cap, channel.round_length + 1)
        return RviConfig(self.delta_max, r_cap, self.max_iters, self.span_tol)


@dataclass(frozen=True)
class RunConfig:
    source: SourceModel
    channel: ChannelModel
    penalty: PenaltySpec
    budget: float | None
    budget_grid: tuple[float, ...] | None
    solver: SolverSettings
    sim: SimSettings
    validate: ValidateSettings
    outputs: dict[str, str] = field(default_factory=dict)
    resolved: dict = field(default_factory=dict)

    def require_scalar_budget(self) -> float:
        if self.budget is None:
            raise ConfigError("budget.R", "this command needs a scalar budget R")
        return self.budget

    def grid_or_scalar(self) -> tuple[float, ...]:
        if self.budget_grid is not None:
            return self.budget_grid
        return (self.require_scalar_budget(),)


def _check_keys(section: dict, path: str, allowed) -> None:
    unknown = set(section) - set(allowed)
    if unknown:
        raise ConfigError(f"{path}.{sorted(unknown)[0]}", "unknown key")


def _num(section: dict, path: str, key: str, required=True, default=None, integer=False):
    if key not in section:
        if required:
            raise ConfigError(f"{path}.{key}", "required field is missing")
        return default
    value = section[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{path}.{key}", f"expected a number, got {value!r}")
    if integer:
        if not isinstance(value, int):
            raise ConfigError(f"{path}.{key}", f"expected an integer, got {value!r}")
        return value
    return float(value)


def _build_source(section) -> SourceModel:
    if not isinstance(section, dict):
        raise ConfigError("source", "expected an object")
    _check_keys(section, "source", ("alpha", "mu", "n_states"))
    alpha = _num(section, "source", "alpha")
    has_mu, has_n = "mu" in section, "n_states" in section
    if has_mu == has_n:
        raise ConfigError("source", "specify exactly one of mu, n_states")
    try:
        if has_mu:
            return SourceModel(alpha=alpha, mu=_num(section, "source", "mu"))
        return SourceModel.from_states(alpha, _num(section, "source", "n_states", integer=True))
    except ValueError as exc:
        raise ConfigError("source", str(exc)) from exc


def _build_channel(section) -> ChannelModel:
    if not isinstance(section, dict):
        raise ConfigError("channel", "expected an object")
    _check_keys(section, "channel", ("p_e", "c", "r_max", "combining"))
    p_e = _num(section, "channel", "p_e")
    c = _num(section, "channel", "c")
    r_max = section.get("r_max", None)
    if r_max is not None:
        r_max = _num(section, "channel", "r_max", integer=True)
    combining = section.get("combining", "soft")
    if not isinstance(combining, str):
        raise ConfigError("channel.combining", f"expected a string, got {combining!r}")
    try:
        return ChannelModel(p_e=p_e, c=c, r_max=r_max, combining=combining)
    except ValueError as exc:
        raise ConfigError("channel", str(exc)) from exc


def _build_penalty(section) -> PenaltySpec:
    if not isinstance(section, dict):
        raise ConfigError("penalty", "expected an object")
    _check_keys(section, "penalty", ("kind", "exponent", "values"))
    kind = section.get("kind")
    if kind not in ("linear", "power", "table"):
        raise ConfigError("penalty.kind", f"expected linear, power or table, got {kind!r}")
    try:
        if kind == "linear":
            if set(section) - {"kind"}:
                raise ConfigError("penalty", "linear penalty takes no parameters")
            return PenaltySpec.linear()
        if kind == "power":
            return PenaltySpec.power(_num(section, "penalty", "exponent"))
        values = section.get("values")
        if not isinstance(values, list) or not values:
            raise ConfigError("penalty.values", "expected a non-empty list")
        return PenaltySpec.from_table(values)
    except ValueError as exc:
        raise ConfigError("penalty", str(exc)) from exc


def _build_budget(section) -> tuple[float | None, tuple[float, ...] | None]:
    if not isinstance(section, dict):
        raise ConfigError("budget", "expected an object")
    _check_keys(section, "budget", ("R", "R_grid"))
    has_r, has_grid = "R" in section, "R_grid" in section
    if has_r == has_grid:
        raise ConfigError("budget", "specify exactly one of R, R_grid")
    if has_r:
        r = _num(section, "budget", "R")
        if not 0.0 < r <= 1.0:
            raise ConfigError("budget.R", f"must lie in (0, 1], got {r}")
        return r, None
    grid = section["R_grid"]
    if not isinstance(grid, list) or len(grid) == 0:
        raise ConfigError("budget.R_grid", "expected a non-empty list")
    values = []
    for i, v in enumerate(grid):
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ConfigError(f"budget.R_grid[{i}]", f"expected a number, got {v!r}")
        if not 0.0 < v <= 1.0:
            raise ConfigError(f"budget.R_grid[{i}]", f"must lie in (0, 1], got {v}")
        values.append(float(v))
    if any(b <= a for a, b in zip(values, values[1:])):
        raise ConfigError("budget.R_grid", "values must be strictly increasing")
    return None, tuple(values)


def _build_solver(section) -> SolverSettings:
    if section is None:
        return SolverSettings()
    if not isinstance(section, dict):
        raise ConfigError("solver", "expected an object")
    _check_keys(section, "solver", ("epsilon", "weighted_epsilon", "l_cap", "lambda_tol", "tail_tol"))
    d = SolverSettings()
    return SolverSettings(
        epsilon=_num(section, "solver", "epsilon", required=False, default=d.epsilon),
        weighted_epsilon=_num(section, "solver", "weighted_epsilon", required=False, default=d.weighted_epsilon),
        l_cap=_num(section, "solver", "l_cap", required=False, default=d.l_cap, integer=True),
        lambda_tol=_num(section, "solver", "lambda_tol", required=False, default=d.lambda_tol),
        tail_tol=_num(section, "solver", "tail_tol", required=False, default=d.tail_tol),
    )


def _build_sim(section) -> SimSettings:
    if section is None:
        return SimSettings()
    if not isinstance(section, dict):
        raise ConfigError("sim", "expected an object")
    _check_keys(section, "sim", ("horizon", "seed", "n_reps"))
    d = SimSettings()
    out = SimSettings(
        horizon=_num(section, "sim", "horizon", required=False, default=d.horizon, integer=True),
        seed=_num(section, "sim", "seed", required=False, default=d.seed, integer=True),
        n_reps=_num(section, "sim", "n_reps", required=False, default=d.n_reps, integer=True),
    )
    if out.horizon < 1 or out.n_reps < 1:
        raise ConfigError("sim", "horizon and n_reps must be >= 1")
    return out


def _build_validate(section) -> ValidateSettings:
    if section is None:
        return ValidateSettings()
    if not isinstance(section, dict):
        raise ConfigError("validate", "expected an object")
    allowed = ("lambdas", "thresholds", "delta_max", "r_cap", "span_tol", "max_iters", "gamma_perturb")
    _check_keys(section, "validate", allowed)
    d = ValidateSettings()
    lambdas = section.get("lambdas", list(d.lambdas))
    thresholds = section.get("thresholds", list(d.thresholds))
    for name, seq in (("lambdas", lambdas), ("thresholds", thresholds)):
        if not isinstance(seq, list) or not seq:
            raise ConfigError(f"validate.{name}", "expected a non-empty list")
    return ValidateSettings(
        lambdas=tuple(float(v) for v in lambdas),
        thresholds=tuple(int(v) for v in thresholds),
        delta_max=_num(section, "validate", "delta_max", required=False, default=d.delta_max, integer=True),
        r_cap=_num(section, "validate", "r_cap", required=False, default=d.r_cap, integer=True),
        span_tol=_num(section, "validate", "span_tol", required=False, default=d.span_tol),
        max_iters=_num(section, "validate", "max_iters", required=False, default=d.max_iters, integer=True),
        gamma_perturb=_num(section, "validate", "gamma_perturb", required=False, default=d.gamma_perturb),
    )


def _build_outputs(section) -> dict[str, str]:
    if section is None:
        return {}
    if not isinstance(section, dict):
        raise ConfigError("outputs", "expected an object")
    _check_keys(section, "outputs", _OUTPUT_KEYS)
    out = {}
    for key, value in section.items():
        if not isinstance(value, str):
            raise ConfigError(f"outputs.{key}", f"expected a path string, got {value!r}")
        out[key] = value
    return out


def parse_config(data: dict) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError("<root>", "expected a JSON object")
    allowed = ("source", "channel", "penalty", "budget", "solver", "sim", "validate", "outputs")
    _check_keys(data, "<root>", allowed)
    for required in ("source", "channel", "penalty", "budget"):
        if required not in data:
            raise ConfigError(required, "required section is missing")
    budget, grid = _build_budget(data["budget"])
    cfg = RunConfig(
        source=_build_source(data["source"]),
        channel=_build_channel(data["channel"]),
        penalty=_build_penalty(data["penalty"]),
        budget=budget,
        budget_grid=grid,
        solver=_build_solver(data.get("solver")),
        sim=_build_sim(data.get("sim")),
        validate=_build_validate(data.get("validate")),
        outputs=_build_outputs(data.get("outputs")),
        resolved=_resolve(data),
    )
    return cfg


def _resolve(data: dict) -> dict:
    """Defaults-filled copy of the raw config, used as the provenance header."""
    resolved = json.loads(json.dumps(data))
    solver = _build_solver(data.get("solver"))
    sim = _build_sim(data.get("sim"))
    resolved.setdefault("channel", {})
    resolved["channel"].setdefault("r_max", None)
    resolved["channel"].setdefault("combining", "soft")
    resolved["solver"] = {
        "epsilon": solver.epsilon,
        "weighted_epsilon": solver.weighted_epsilon,
        "l_cap": solver.l_cap,
        "lambda_tol": solver.lambda_tol,
        "tail_tol": solver.tail_tol,
    }
    resolved["sim"] = {"horizon": sim.horizon, "seed": sim.seed, "n_reps": sim.n_reps}
    return resolved


def load_config(path: str) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as handle:
            data = json.load(handle)
    except OSError as exc:
        raise ConfigError("<file>", f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError("<file>", f"{path} is not valid JSON: {exc}") from exc
    return parse_config(data)
