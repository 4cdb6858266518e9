"""File formats and run configuration.

Formats are deliberately plain: CSV for time series (diff-friendly,
language-neutral) and JSON for configuration.  Parsing is strict; every
malformed input becomes a :class:`ConfigError` or :class:`ParseError`
naming the offending key path or line, never a crash or a silent
default.  Result values are written with ``repr`` so a read-back
reproduces the in-memory floats bit for bit.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

from .engine import (
    FeederRun,
    PriceResponseConfig,
    PriceSeries,
    SimulationConfig,
    WeatherTape,
    piecewise_prices,
    synthetic_weather,
)
from .population import (
    FeederPlan,
    IntRange,
    NonTcaArchetype,
    PopulationConfig,
    PRESETS,
    TcaArchetype,
    UniformRange,
)


class ConfigError(ValueError):
    """Structured configuration problem; message names the key path."""


class ParseError(ValueError):
    """Malformed input file; message names the file and line."""


# --------------------------------------------------------------------------
# Time-series files
# --------------------------------------------------------------------------


def _load_hourly_csv(path: str | Path, value_column: str) -> list[float]:
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: empty file, expected header") from None
        expected = ["hour", value_column]
        if [h.strip() for h in header] != expected:
            raise ParseError(
                f"{path}: line 1: header must be {','.join(expected)!r}, "
                f"got {','.join(header)!r}"
            )
        values: list[float] = []
        for line_no, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != 2:
                raise ParseError(f"{path}: line {line_no}: expected 2 fields")
            try:
                hour = int(row[0])
            except ValueError:
                raise ParseError(
                    f"{path}: line {line_no}: non-integer hour {row[0]!r}"
                ) from None
            if hour != len(values):
                raise ParseError(
                    f"{path}: line {line_no}: hour {hour} out of order, "
                    f"expected {len(values)}"
                )
            try:
                value = float(row[1])
            except ValueError:
                raise ParseError(
                    f"{path}: line {line_no}: non-numeric {value_column} "
                    f"{row[1]!r}"
                ) from None
            values.append(value)
    if not values:
        raise ParseError(f"{path}: no records")
    return values


def load_weather(path: str | Path) -> WeatherTape:
    """CSV with header ``hour,temperature_c``; hours 0,1,2,... consecutive."""
    return WeatherTape(tuple(_load_hourly_csv(path, "temperature_c")))


def load_prices(path: str | Path) -> PriceSeries:
    """CSV with header ``hour,price``; negative prices are parse errors."""
    path = Path(path)
    values = _load_hourly_csv(path, "price")
    for i, v in enumerate(values):
        if v < 0:
            raise ParseError(f"{path}: line {i + 2}: negative price {v}")
    return PriceSeries(tuple(values))


def write_weather(tape: WeatherTape, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("hour,temperature_c\n")
        for hour, v in enumerate(tape.values):
            fh.write(f"{hour},{v!r}\n")


def write_prices(series: PriceSeries, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("hour,price\n")
        for hour, v in enumerate(series.values):
            fh.write(f"{hour},{v!r}\n")


# --------------------------------------------------------------------------
# Results files
# --------------------------------------------------------------------------


def write_results(runs: list[FeederRun], path: str | Path) -> None:
    """Feeder-head series as ``hour,feeder_id,p_l_kw``, hour-major."""
    runs = sorted(runs, key=lambda r: r.feeder_id)
    n_steps = len(runs[0].head.values) if runs else 0
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("hour,feeder_id,p_l_kw\n")
        for t in range(n_steps):
            for run in runs:
                fh.write(f"{t},{run.feeder_id},{run.head.values[t]!r}\n")


def write_house_results(runs: list[FeederRun], path: str | Path) -> None:
    """Per-house series as ``hour,house_id,p_h_kw`` (feeder-ascending)."""
    runs = sorted(runs, key=lambda r: r.feeder_id)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("hour,house_id,p_h_kw\n")
        for run in runs:
            if run.per_house is None:
                raise ValueError(
                    f"feeder {run.feeder_id} was simulated without "
                    "per-house collection"
                )
            n_steps = len(run.head.values)
            for t in range(n_steps):
                for series in run.per_house:
                    fh.write(f"{t},{series.entity_id},{series.values[t]!r}\n")


def load_results(path: str | Path) -> dict[int, tuple[float, ...]]:
    """Read a results CSV back as {feeder_id: series}."""
    path = Path(path)
    by_feeder: dict[int, list[float]] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["hour", "feeder_id", "p_l_kw"]:
            raise ParseError(f"{path}: unexpected results header {header!r}")
        for line_no, row in enumerate(reader, start=2):
            if len(row) != 3:
                raise ParseError(f"{path}: line {line_no}: expected 3 fields")
            by_feeder.setdefault(int(row[1]), []).append(float(row[2]))
    return {fid: tuple(vals) for fid, vals in by_feeder.items()}


# --------------------------------------------------------------------------
# Run configuration
# --------------------------------------------------------------------------

MODES = ("seq", "shared", "mp")
TRANSPORTS = ("thread", "process")


@dataclass(frozen=True, slots=True)
class RunConfig:
    seed: int
    horizon_hours: float
    step_hours: float
    mode: str
    workers: int
    feeders: int
    houses_per_feeder: int
    transport: str
    schedule: str | tuple[int, ...]
    population: PopulationConfig
    sim: SimulationConfig
    out_dir: str
    per_house: bool


def _require_keys(obj: dict, allowed: set[str], required: set[str], path: str) -> None:
    if not isinstance(obj, dict):
        raise ConfigError(f"{path}: expected an object")
    unknown = set(obj) - allowed
    if unknown:
        raise ConfigError(f"{path}: unknown key {sorted(unknown)[0]!r}")
    missing = required - set(obj)
    if missing:
        raise ConfigError(f"{path}: missing required key {sorted(missing)[0]!r}")


def _range(value, path: str) -> UniformRange:
    if not (isinstance(value, list) and len(value) == 2):
        raise ConfigError(f"{path}: expected [low, high]")
    try:
        return UniformRange(float(value[0]), float(value[1]))
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def _int_range(value, path: str) -> IntRange:
    if not (isinstance(value, list) and len(value) == 2):
        raise ConfigError(f"{path}: expected [low, high]")
    try:
        return IntRange(int(value[0]), int(value[1]))
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from None


_TCA_KEYS = {
    "name", "mode", "count", "thermal_resistance", "thermal_capacitance",
    "rated_power", "conversion_factor", "setpoint", "deadband", "indoor",
}
_NON_TCA_KEYS = {"name", "count", "rated_power", "schedule_template", "usage_scale"}


def _parse_population(raw, seed: int, path: str) -> PopulationConfig:
    if raw is None:
        return PRESETS["default"](seed)
    _require_keys(
        raw, {"preset", "tca_archetypes", "non_tca_archetypes"}, set(), path
    )
    if "preset" in raw:
        if len(raw) != 1:
            raise ConfigError(f"{path}: preset excludes explicit archetypes")
        name = raw["preset"]
        if name not in PRESETS:
            raise ConfigError(
                f"{path}.preset: unknown preset {name!r}, "
                f"expected one of {sorted(PRESETS)}"
            )
        return PRESETS[name](seed)

    tcas = []
    for i, entry in enumerate(raw.get("tca_archetypes", [])):
        p = f"{path}.tca_archetypes[{i}]"
        _require_keys(entry, _TCA_KEYS, _TCA_KEYS - {"indoor", "count"}, p)
        try:
            tcas.append(TcaArchetype(
                name=entry["name"],
                count=_int_range(entry.get("count", [1, 1]), f"{p}.count"),
                mode=entry["mode"],
                thermal_resistance=_range(entry["thermal_resistance"], f"{p}.thermal_resistance"),
                thermal_capacitance=_range(entry["thermal_capacitance"], f"{p}.thermal_capacitance"),
                rated_power=_range(entry["rated_power"], f"{p}.rated_power"),
                conversion_factor=_range(entry["conversion_factor"], f"{p}.conversion_factor"),
                setpoint=_range(entry["setpoint"], f"{p}.setpoint"),
                deadband=_range(entry["deadband"], f"{p}.deadband"),
                indoor=bool(entry.get("indoor", False)),
            ))
        except ValueError as exc:
            raise ConfigError(f"{p}: {exc}") from None
    non_tcas = []
    for i, entry in enumerate(raw.get("non_tca_archetypes", [])):
        p = f"{path}.non_tca_archetypes[{i}]"
        _require_keys(entry, _NON_TCA_KEYS, _NON_TCA_KEYS - {"usage_scale", "count"}, p)
        template = entry["schedule_template"]
        if not isinstance(template, list) or not template:
            raise ConfigError(f"{p}.schedule_template: expected a non-empty list")
        try:
            non_tcas.append(NonTcaArchetype(
                name=entry["name"],
                count=_int_range(entry.get("count", [1, 1]), f"{p}.count"),
                rated_power=_range(entry["rated_power"], f"{p}.rated_power"),
                schedule_template=tuple(float(v) for v in template),
                usage_scale=_range(entry.get("usage_scale", [1.0, 1.0]), f"{p}.usage_scale"),
            ))
        except ValueError as exc:
            raise ConfigError(f"{p}: {exc}") from None
    if not tcas and not non_tcas:
        raise ConfigError(f"{path}: population has no archetypes")
    return PopulationConfig(seed, tuple(tcas), tuple(non_tcas))


def _parse_weather(raw, n_steps: int, step_hours: float, base: Path) -> WeatherTape:
    if raw is None:
        return synthetic_weather(n_steps, step_hours=step_hours)
    _require_keys(raw, {"path", "constant", "daily_cycle"}, set(), "weather")
    if len(raw) != 1:
        raise ConfigError("weather: give exactly one of path/constant/daily_cycle")
    if "path" in raw:
        return load_weather(base / raw["path"])
    if "constant" in raw:
        return WeatherTape(tuple(float(raw["constant"]) for _ in range(n_steps)))
    cycle = raw["daily_cycle"]
    _require_keys(cycle, {"mean", "amplitude"}, {"mean", "amplitude"}, "weather.daily_cycle")
    return synthetic_weather(
        n_steps, mean=float(cycle["mean"]), amplitude=float(cycle["amplitude"]),
        step_hours=step_hours,
    )


def _parse_prices(raw, n_steps: int, base: Path) -> PriceSeries:
    if raw is None:
        return piecewise_prices(n_steps)
    _require_keys(raw, {"path", "constant", "base", "steps"}, set(), "prices")
    if "path" in raw:
        if len(raw) != 1:
            raise ConfigError("prices: path excludes other price keys")
        return load_prices(base / raw["path"])
    try:
        if "constant" in raw:
            if len(raw) != 1:
                raise ConfigError("prices: constant excludes other price keys")
            return piecewise_prices(n_steps, base=float(raw["constant"]))
        steps = raw.get("steps", [])
        if not all(isinstance(s, list) and len(s) == 2 for s in steps):
            raise ConfigError("prices.steps: expected [[hour, price], ...]")
        return piecewise_prices(
            n_steps,
            base=float(raw.get("base", 30.0)),
            steps=tuple((int(t), float(p)) for t, p in steps),
        )
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"prices: {exc}") from None


_TOP_KEYS = {
    "seed", "horizon_hours", "step_hours", "mode", "workers", "feeders",
    "houses_per_feeder", "transport", "schedule", "population", "weather",
    "prices", "price_response", "out_dir", "per_house",
}


def load_run_config(path: str | Path) -> RunConfig:
    """Parse and fully validate a run configuration file."""
    path = Path(path)
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file {path} does not exist") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from None

    _require_keys(raw, _TOP_KEYS, {"seed"}, str(path))

    seed = raw["seed"]
    if not isinstance(seed, int):
        raise ConfigError("seed: must be an integer")
    horizon = float(raw.get("horizon_hours", 100.0))
    step = float(raw.get("step_hours", 1.0))
    mode = raw.get("mode", "seq")
    if mode not in MODES:
        raise ConfigError(f"mode: {mode!r} is not one of {MODES}")
    workers = int(raw.get("workers", 1))
    if workers < 1:
        raise ConfigError("workers: must be >= 1")
    if mode == "mp":
        if "feeders" not in raw:
            raise ConfigError("mode mp requires an explicit feeder count")
        if raw.get("per_house", False):
            raise ConfigError(
                "per_house output is unavailable in mp mode (workers only "
                "report aggregates); use seq or shared"
            )
    feeders = int(raw.get("feeders", 1))
    if feeders < 1:
        raise ConfigError("feeders: must be >= 1")
    houses = int(raw.get("houses_per_feeder", 1000))
    if houses < 0:
        raise ConfigError("houses_per_feeder: must be >= 0")
    transport = raw.get("transport", "thread")
    if transport not in TRANSPORTS:
        raise ConfigError(f"transport: {transport!r} is not one of {TRANSPORTS}")

    schedule = raw.get("schedule", "end_only")
    if isinstance(schedule, list):
        if not all(isinstance(t, int) for t in schedule):
            raise ConfigError("schedule: explicit points must be integers")
        schedule = tuple(schedule)
    elif schedule not in ("end_only", "per_step"):
        raise ConfigError(
            "schedule: expected 'end_only', 'per_step', or a list of steps"
        )

    ratio = horizon / step if step > 0 else 0
    if step <= 0 or horizon <= 0 or abs(ratio - round(ratio)) > 1e-9 or round(ratio) < 1:
        raise ConfigError(
            f"horizon_hours {horizon} must be a positive whole number of "
            f"step_hours {step}"
        )
    n_steps = round(ratio)

    population = _parse_population(raw.get("population"), seed, "population")
    weather = _parse_weather(raw.get("weather"), n_steps, step, path.parent)
    prices = _parse_prices(raw.get("prices"), n_steps, path.parent)

    response = None
    if raw.get("price_response") is not None:
        pr = raw["price_response"]
        _require_keys(
            pr, {"reference_price", "slope", "max_offset"},
            {"reference_price", "slope", "max_offset"}, "price_response",
        )
        try:
            response = PriceResponseConfig(
                float(pr["reference_price"]), float(pr["slope"]),
                float(pr["max_offset"]),
            )
        except ValueError as exc:
            raise ConfigError(f"price_response: {exc}") from None

    try:
        sim = SimulationConfig(
            weather=weather, prices=prices, horizon_hours=horizon,
            step_hours=step, price_response=response,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None

    return RunConfig(
        seed=seed,
        horizon_hours=horizon,
        step_hours=step,
        mode=mode,
        workers=workers,
        feeders=feeders,
        houses_per_feeder=houses,
        transport=transport,
        schedule=schedule,
        population=population,
        sim=sim,
        out_dir=raw.get("out_dir", "results"),
        per_house=bool(raw.get("per_house", False)),
    )


def feeder_plans(config: RunConfig) -> list[FeederPlan]:
    return [
        FeederPlan(config.population, fid, config.houses_per_feeder)
        for fid in range(config.feeders)
    ]


def scaffold_config(
    houses: int,
    feeders: int,
    seed: int = 42,
    population: str = "default",
    mode: str = "seq",
) -> dict:
    """A complete, self-contained config with synthetic inputs."""
    if population not in PRESETS:
        raise ConfigError(f"unknown population preset {population!r}")
    if mode not in MODES:
        raise ConfigError(f"mode {mode!r} is not one of {MODES}")
    if houses < 0 or feeders < 1:
        raise ConfigError("need houses >= 0 and feeders >= 1")
    return {
        "seed": seed,
        "horizon_hours": 100,
        "step_hours": 1,
        "mode": mode,
        "workers": 1,
        "feeders": feeders,
        "houses_per_feeder": houses,
        "transport": "thread",
        "schedule": "end_only",
        "population": {"preset": population},
        "weather": {"daily_cycle": {"mean": 8.0, "amplitude": 6.0}},
        "prices": {"base": 30.0, "steps": [[25, 45.0], [50, 30.0], [75, 60.0]]},
        "price_response": None,
        "out_dir": "results",
        "per_house": False,
    }
