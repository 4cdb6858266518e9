"""Seed-driven synthesis of house and feeder populations.

Every sampled value is a pure function of (master seed, feeder id,
house index, archetype, instance, parameter name) via a hashed key, so
a house is identical no matter when, where, or in what order it is
generated.  That property underpins the parallel-vs-sequential
equivalence tests: executors may materialize populations independently
and still agree bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator

from .appliances import (
    COOLING,
    HEATING,
    NonTcaSpec,
    StepSeries,
    TcaState,
    ThermalParams,
    ThermostatConfig,
)
from .rng import derive_seed, unit_draw


@dataclass(frozen=True, slots=True)
class UniformRange:
    """Closed uniform sampling range; low == high is a point value."""

    low: float
    high: float

    def __post_init__(self) -> None:
        if self.low > self.high:
            raise ValueError(f"range low {self.low} > high {self.high}")

    @classmethod
    def point(cls, value: float) -> "UniformRange":
        return cls(value, value)

    def sample(self, u: float) -> float:
        return self.low + u * (self.high - self.low)

    @property
    def midpoint(self) -> float:
        return (self.low + self.high) / 2.0


@dataclass(frozen=True, slots=True)
class IntRange:
    """Uniform integer range, inclusive on both ends."""

    low: int
    high: int

    def __post_init__(self) -> None:
        if self.low > self.high:
            raise ValueError(f"range low {self.low} > high {self.high}")
        if self.low < 0:
            raise ValueError("counts cannot be negative")

    @classmethod
    def exactly(cls, value: int) -> "IntRange":
        return cls(value, value)

    def sample(self, u: float) -> int:
        span = self.high - self.low + 1
        return self.low + min(int(u * span), span - 1)


@dataclass(frozen=True, slots=True)
class TcaArchetype:
    """Sampling ranges for one family of thermostatic appliances.

    ``indoor`` appliances (tanks, refrigerators) see the conditioned
    indoor temperature instead of the outdoor weather tape.
    """

    name: str
    count: IntRange
    mode: str
    thermal_resistance: UniformRange
    thermal_capacitance: UniformRange
    rated_power: UniformRange
    conversion_factor: UniformRange
    setpoint: UniformRange
    deadband: UniformRange
    indoor: bool = False


@dataclass(frozen=True, slots=True)
class NonTcaArchetype:
    """Sampling ranges for one family of stochastic appliances."""

    name: str
    count: IntRange
    rated_power: UniformRange
    # Repeating per-step on-probability template (typically 24 hourly
    # values) scaled per house by usage_scale, clamped to [0, 1].
    schedule_template: tuple[float, ...]
    usage_scale: UniformRange = field(default_factory=lambda: UniformRange.point(1.0))


@dataclass(frozen=True, slots=True)
class TcaSpec:
    """One concrete TCA: physics, thermostat, and starting state."""

    params: ThermalParams
    thermostat: ThermostatConfig
    initial: TcaState
    indoor: bool = False


@dataclass(frozen=True, slots=True)
class HouseSpec:
    house_id: int
    tcas: tuple[TcaSpec, ...]
    non_tcas: tuple[NonTcaSpec, ...]


@dataclass(frozen=True, slots=True)
class FeederSpec:
    """A feeder's house population, ordered by ascending house_id."""

    feeder_id: int
    houses: tuple[HouseSpec, ...]
    weather_id: str | None = None
    price_id: str | None = None

    def __post_init__(self) -> None:
        last = -1
        for h in self.houses:
            if h.house_id <= last:
                raise ValueError(
                    f"feeder {self.feeder_id}: house ids must be unique "
                    f"and ascending (saw {h.house_id} after {last})"
                )
            last = h.house_id

    @property
    def n_houses(self) -> int:
        return len(self.houses)


@dataclass(frozen=True, slots=True)
class PopulationConfig:
    master_seed: int
    tca_archetypes: tuple[TcaArchetype, ...]
    non_tca_archetypes: tuple[NonTcaArchetype, ...]


def _u(config: PopulationConfig, feeder_id: int, house: int, *key: object) -> float:
    seed = derive_seed(config.master_seed, feeder_id, house, *key)
    return unit_draw(seed, 0)


# Shared, per-archetype cache of scaled probability schedules.  Point
# usage scales (the common case at large scale) collapse to one tuple
# per archetype instead of one per house.
_SCHEDULE_CACHE: dict[tuple, StepSeries] = {}


def _scaled_schedule(template: tuple[float, ...], scale: float) -> StepSeries:
    key = (template, scale)
    series = _SCHEDULE_CACHE.get(key)
    if series is None:
        values = tuple(min(1.0, max(0.0, p * scale)) for p in template)
        series = StepSeries(values, cyclic=True)
        if len(_SCHEDULE_CACHE) < 4096:
            _SCHEDULE_CACHE[key] = series
    return series


def generate_house(
    config: PopulationConfig, house_index: int, feeder_id: int = 0
) -> HouseSpec:
    """Deterministic house synthesis; see module docstring for the
    (seed, ids, parameter-name) keying contract."""
    tcas = []
    for ar in config.tca_archetypes:
        n = ar.count.sample(_u(config, feeder_id, house_index, ar.name, "count"))
        for k in range(n):
            def draw(param: str, rng: UniformRange) -> float:
                return rng.sample(
                    _u(config, feeder_id, house_index, ar.name, k, param)
                )

            params = ThermalParams(
                thermal_resistance=draw("thermal_resistance", ar.thermal_resistance),
                thermal_capacitance=draw("thermal_capacitance", ar.thermal_capacitance),
                rated_power=draw("rated_power", ar.rated_power),
                conversion_factor=draw("conversion_factor", ar.conversion_factor),
                mode=ar.mode,
            )
            setpoint = draw("setpoint", ar.setpoint)
            deadband = draw("deadband", ar.deadband)
            thermostat = ThermostatConfig(StepSeries.constant(setpoint), deadband)
            # Start somewhere inside the band with a random phase.
            u_t = _u(config, feeder_id, house_index, ar.name, k, "initial_temp")
            t0 = (setpoint - deadband / 2.0) + u_t * deadband
            on0 = _u(config, feeder_id, house_index, ar.name, k, "initial_on") < 0.5
            tcas.append(TcaSpec(params, thermostat, TcaState(t0, on0), ar.indoor))

    non_tcas = []
    for ar in config.non_tca_archetypes:
        n = ar.count.sample(_u(config, feeder_id, house_index, ar.name, "count"))
        for k in range(n):
            rated = ar.rated_power.sample(
                _u(config, feeder_id, house_index, ar.name, k, "rated_power")
            )
            scale = ar.usage_scale.sample(
                _u(config, feeder_id, house_index, ar.name, k, "usage_scale")
            )
            schedule = _scaled_schedule(ar.schedule_template, scale)
            stream = derive_seed(
                config.master_seed, feeder_id, house_index, ar.name, k, "stream"
            )
            non_tcas.append(NonTcaSpec(rated, schedule, stream_seed=stream))

    return HouseSpec(house_index, tuple(tcas), tuple(non_tcas))


def generate_feeder(
    config: PopulationConfig, feeder_id: int, n_houses: int,
    weather_id: str | None = None, price_id: str | None = None,
) -> FeederSpec:
    if n_houses < 0:
        raise ValueError("n_houses must be >= 0")
    houses = tuple(
        generate_house(config, i, feeder_id) for i in range(n_houses)
    )
    return FeederSpec(feeder_id, houses, weather_id, price_id)


def iter_houses(
    config: PopulationConfig, feeder_id: int, n_houses: int
) -> Iterator[HouseSpec]:
    """Streaming variant of generate_feeder, for memory-bounded scans."""
    for i in range(n_houses):
        yield generate_house(config, i, feeder_id)


@dataclass(frozen=True, slots=True)
class FeederPlan:
    """A feeder by recipe instead of by value.

    Executors accept plans interchangeably with materialized specs;
    workers that receive a plan generate their own houses locally, so
    no house data ever crosses a process boundary.
    """

    config: PopulationConfig
    feeder_id: int
    n_houses: int
    weather_id: str | None = None
    price_id: str | None = None

    def materialize(self) -> FeederSpec:
        return generate_feeder(
            self.config, self.feeder_id, self.n_houses,
            self.weather_id, self.price_id,
        )


FeederLike = FeederSpec | FeederPlan


def materialize(feeder: FeederLike) -> FeederSpec:
    return feeder.materialize() if isinstance(feeder, FeederPlan) else feeder


def feeder_id_of(feeder: FeederLike) -> int:
    return feeder.feeder_id


# --------------------------------------------------------------------------
# Presets
# --------------------------------------------------------------------------

_DIURNAL_EVENING = (
    0.02, 0.01, 0.01, 0.01, 0.01, 0.02, 0.04, 0.08,
    0.10, 0.08, 0.06, 0.06, 0.08, 0.08, 0.06, 0.06,
    0.08, 0.12, 0.18, 0.20, 0.16, 0.10, 0.06, 0.03,
)
_DIURNAL_DAYTIME = (
    0.01, 0.01, 0.01, 0.01, 0.02, 0.04, 0.10, 0.14,
    0.12, 0.10, 0.10, 0.12, 0.12, 0.10, 0.08, 0.08,
    0.10, 0.14, 0.16, 0.14, 0.10, 0.06, 0.03, 0.02,
)
_DIURNAL_LIGHTING = (
    0.15, 0.08, 0.05, 0.05, 0.05, 0.10, 0.30, 0.40,
    0.25, 0.10, 0.05, 0.05, 0.05, 0.05, 0.05, 0.08,
    0.20, 0.50, 0.80, 0.85, 0.75, 0.55, 0.35, 0.20,
)


def hvac_archetype(count: IntRange = IntRange.exactly(1)) -> TcaArchetype:
    """Whole-house heating: heat-pump-like COP, hours-scale time constant."""
    return TcaArchetype(
        name="hvac",
        count=count,
        mode=HEATING,
        thermal_resistance=UniformRange(3.0, 5.0),      # °C/kW
        thermal_capacitance=UniformRange(2.0, 3.0),     # kWh/°C
        rated_power=UniformRange(3.0, 5.0),             # kW electric
        conversion_factor=UniformRange(2.5, 3.5),       # COP
        setpoint=UniformRange(19.0, 22.0),
        deadband=UniformRange(1.0, 2.0),
    )


def water_heater_archetype(count: IntRange = IntRange.exactly(1)) -> TcaArchetype:
    """Well-insulated tank: long time constant, standby cycling only."""
    return TcaArchetype(
        name="water_heater",
        count=count,
        mode=HEATING,
        thermal_resistance=UniformRange(300.0, 500.0),
        thermal_capacitance=UniformRange(0.25, 0.35),
        rated_power=UniformRange(3.5, 4.5),
        conversion_factor=UniformRange(0.95, 1.0),
        setpoint=UniformRange(50.0, 58.0),
        deadband=UniformRange(4.0, 6.0),
        indoor=True,
    )


def refrigerator_archetype(count: IntRange = IntRange.exactly(1)) -> TcaArchetype:
    return TcaArchetype(
        name="refrigerator",
        count=count,
        mode=COOLING,
        thermal_resistance=UniformRange(70.0, 90.0),
        thermal_capacitance=UniformRange(0.02, 0.03),
        rated_power=UniformRange(0.15, 0.25),
        conversion_factor=UniformRange(2.5, 3.5),
        setpoint=UniformRange(3.0, 5.0),
        deadband=UniformRange(1.5, 2.5),
        indoor=True,
    )


def default_non_tca_archetypes() -> tuple[NonTcaArchetype, ...]:
    return (
        NonTcaArchetype(
            "dishwasher", IntRange.exactly(1), UniformRange(1.0, 1.4),
            _DIURNAL_EVENING, UniformRange(0.6, 1.2),
        ),
        NonTcaArchetype(
            "washer_dryer", IntRange(0, 1), UniformRange(2.5, 3.5),
            _DIURNAL_DAYTIME, UniformRange(0.5, 1.0),
        ),
        NonTcaArchetype(
            "lighting", IntRange.exactly(1), UniformRange(0.2, 0.6),
            _DIURNAL_LIGHTING, UniformRange(0.8, 1.0),
        ),
    )


def default_population(master_seed: int) -> PopulationConfig:
    """Full household: three TCA archetypes plus stochastic appliances."""
    return PopulationConfig(
        master_seed=master_seed,
        tca_archetypes=(
            hvac_archetype(),
            water_heater_archetype(),
            refrigerator_archetype(),
        ),
        non_tca_archetypes=default_non_tca_archetypes(),
    )


def lean_population(master_seed: int) -> PopulationConfig:
    """One HVAC plus one lighting circuit per house.

    The minimal workload used for large-scale and timing-sensitive
    runs; point usage scales let every house share one schedule tuple.
    """
    return PopulationConfig(
        master_seed=master_seed,
        tca_archetypes=(hvac_archetype(),),
        non_tca_archetypes=(
            NonTcaArchetype(
                "lighting", IntRange.exactly(1), UniformRange(0.3, 0.5),
                _DIURNAL_LIGHTING, UniformRange.point(1.0),
            ),
        ),
    )


PRESETS = {
    "default": default_population,
    "lean": lean_population,
}
