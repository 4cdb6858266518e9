"""Sequential simulation kernel.

The per-step pipeline: resolve exogenous inputs (ambient temperature,
market price), advance every appliance in every house, sum appliance
mean powers into the household load P_H, and sum households in
ascending house-id order into the feeder-head load P_L.

Summation order is fixed on purpose: floating-point addition is not
associative, and the parallel executors are required to reproduce the
sequential engine bit for bit.  Every executor drives the same
:class:`FeederSimulation` stepping code, so equality holds by
construction rather than by tolerance.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

from .appliances import non_tca_step, tca_step, TcaState
from .population import FeederLike, FeederSpec, HouseSpec, materialize
from .rng import unit_draw

# Conditioned indoor temperature seen by indoor-coupled TCAs (water
# heaters, refrigerators); outdoor weather would stop them cycling
# whenever it drifts past their deadband.
INDOOR_AMBIENT_C = 20.0


@dataclass(frozen=True, slots=True)
class WeatherTape:
    """Per-step ambient temperature in °C."""

    values: tuple[float, ...]

    def __post_init__(self) -> None:
        if not self.values:
            raise ValueError("weather tape is empty")

    def value_at(self, step: int) -> float:
        return self.values[step]

    def covers(self, n_steps: int) -> bool:
        return len(self.values) >= n_steps


@dataclass(frozen=True, slots=True)
class PriceSeries:
    """Per-step market price (currency/MWh)."""

    values: tuple[float, ...]

    def __post_init__(self) -> None:
        if not self.values:
            raise ValueError("price series is empty")
        for p in self.values:
            if p < 0:
                raise ValueError(f"negative price {p}")

    def value_at(self, step: int) -> float:
        return self.values[step]

    def covers(self, n_steps: int) -> bool:
        return len(self.values) >= n_steps

    def change_points(self, n_steps: int | None = None) -> tuple[int, ...]:
        """Steps (>= 1) where the price differs from the previous step."""
        n = len(self.values) if n_steps is None else min(n_steps, len(self.values))
        return tuple(
            t for t in range(1, n) if self.values[t] != self.values[t - 1]
        )


@dataclass(frozen=True, slots=True)
class PriceResponseConfig:
    """Clamped linear setpoint offset per relative price deviation.

    offset = clamp(slope * (B - reference) / reference, ±max_offset);
    positive offsets shed load (heating setpoints drop, cooling rise).
    """

    reference_price: float
    slope: float
    max_offset: float

    def __post_init__(self) -> None:
        if self.reference_price <= 0:
            raise ValueError("reference_price must be > 0")
        if self.max_offset < 0:
            raise ValueError("max_offset must be >= 0")


def price_offset(config: PriceResponseConfig, price: float) -> float:
    """Comfort offset in °C for the given market price."""
    if price < 0:
        raise ValueError(f"negative price {price}")
    raw = config.slope * (price - config.reference_price) / config.reference_price
    if raw > config.max_offset:
        return config.max_offset
    if raw < -config.max_offset:
        return -config.max_offset
    return raw


@dataclass(frozen=True, slots=True, kw_only=True)
class SimulationConfig:
    weather: WeatherTape
    prices: PriceSeries
    horizon_hours: float = 100.0
    step_hours: float = 1.0
    price_response: PriceResponseConfig | None = None
    # Feeder-specific inputs, looked up via FeederSpec.weather_id/price_id.
    weather_overrides: Mapping[str, WeatherTape] = field(default_factory=dict)
    price_overrides: Mapping[str, PriceSeries] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.horizon_hours <= 0:
            raise ValueError("horizon_hours must be > 0")
        if self.step_hours <= 0:
            raise ValueError("step_hours must be > 0")
        ratio = self.horizon_hours / self.step_hours
        if abs(ratio - round(ratio)) > 1e-9 or round(ratio) < 1:
            raise ValueError(
                f"horizon {self.horizon_hours} h is not a whole number of "
                f"{self.step_hours} h steps"
            )
        n = round(ratio)
        for name, tape in [("weather", self.weather), *self.weather_overrides.items()]:
            if not tape.covers(n):
                raise ValueError(f"weather tape {name!r} shorter than {n} steps")
        for name, series in [("prices", self.prices), *self.price_overrides.items()]:
            if not series.covers(n):
                raise ValueError(f"price series {name!r} shorter than {n} steps")

    @property
    def n_steps(self) -> int:
        return round(self.horizon_hours / self.step_hours)

    def weather_for(self, feeder: FeederSpec) -> WeatherTape:
        if feeder.weather_id is None:
            return self.weather
        try:
            return self.weather_overrides[feeder.weather_id]
        except KeyError:
            raise ValueError(
                f"feeder {feeder.feeder_id} references unknown weather "
                f"{feeder.weather_id!r}"
            ) from None

    def prices_for(self, feeder: FeederSpec) -> PriceSeries:
        if feeder.price_id is None:
            return self.prices
        try:
            return self.price_overrides[feeder.price_id]
        except KeyError:
            raise ValueError(
                f"feeder {feeder.feeder_id} references unknown prices "
                f"{feeder.price_id!r}"
            ) from None


@dataclass(frozen=True, slots=True)
class LoadSeries:
    """Per-step mean power in kW for one entity."""

    kind: str  # "household" | "feeder_head" | "global"
    entity_id: int
    values: tuple[float, ...]


@dataclass(frozen=True, slots=True)
class FeederRun:
    feeder_id: int
    head: LoadSeries
    per_house: tuple[LoadSeries, ...] | None = None


def advance_house_states(
    house: HouseSpec,
    states: list[TcaState],
    ambient: float,
    offset: float,
    step_index: int,
    dt: float,
) -> float:
    """Advance every appliance of one house across one step, mutating
    ``states`` in place.  Returns the household mean power P_H in kW.

    Appliance order (TCAs in spec order, then non-TCAs) fixes the
    summation order of P_H.
    """
    p_h = 0.0
    tcas = house.tcas
    for j in range(len(tcas)):
        spec = tcas[j]
        amb = INDOOR_AMBIENT_C if spec.indoor else ambient
        new_state, _energy, mean_power = tca_step(
            states[j], spec.params, spec.thermostat, amb, dt,
            step_index, offset,
        )
        states[j] = new_state
        p_h += mean_power
    for spec in house.non_tcas:
        draw = unit_draw(spec.stream_seed, step_index)
        _on, _energy, mean_power = non_tca_step(spec, step_index, draw, dt)
        p_h += mean_power
    return p_h


def simulate_house_step(
    house: HouseSpec,
    states: list[TcaState],
    ambient: float,
    price: float,
    step_index: int,
    dt: float,
    price_response: PriceResponseConfig | None = None,
) -> tuple[list[TcaState], float]:
    """Pure single-house step: returns (new states, P_H in kW)."""
    offset = price_offset(price_response, price) if price_response else 0.0
    new_states = list(states)
    p_h = advance_house_states(house, new_states, ambient, offset, step_index, dt)
    return new_states, p_h


class FeederSimulation:
    """Stepping machinery for one feeder.

    Owns the mutable appliance states (copied from the specs, so the
    same FeederSpec can be re-run and the run repeated identically) and
    records the feeder-head series.  All executors, sequential or
    parallel, drive this same code.
    """

    def __init__(
        self,
        feeder: FeederSpec,
        sim: SimulationConfig,
        collect_per_house: bool = False,
    ):
        self.feeder = feeder
        self.sim = sim
        self.weather = sim.weather_for(feeder)
        self.prices = sim.prices_for(feeder)
        self.n_steps = sim.n_steps
        self.dt = sim.step_hours
        self._validate_schedules()
        self.states: list[list[TcaState]] = [
            [t.initial for t in h.tcas] for h in feeder.houses
        ]
        self.head: list[float] = []
        self.house_power: list[list[float]] | None = (
            [[] for _ in feeder.houses] if collect_per_house else None
        )

    def _validate_schedules(self) -> None:
        n = self.n_steps
        for h in self.feeder.houses:
            for t in h.tcas:
                if not t.thermostat.setpoint_sequence.covers(n):
                    raise ValueError(
                        f"house {h.house_id}: setpoint schedule shorter "
                        f"than {n} steps"
                    )
            for nt in h.non_tcas:
                if not nt.on_probability_schedule.covers(n):
                    raise ValueError(
                        f"house {h.house_id}: on-probability schedule "
                        f"shorter than {n} steps"
                    )

    @property
    def n_houses(self) -> int:
        return len(self.feeder.houses)

    def offset_for(self, price: float) -> float:
        pr = self.sim.price_response
        return price_offset(pr, price) if pr is not None else 0.0

    def advance_house(
        self, index: int, step_index: int, ambient: float, offset: float
    ) -> float:
        """Advance one house; returns its P_H.  Disjoint house indexes
        may be advanced concurrently."""
        p_h = advance_house_states(
            self.feeder.houses[index], self.states[index],
            ambient, offset, step_index, self.dt,
        )
        if self.house_power is not None:
            self.house_power[index].append(p_h)
        return p_h

    def reduce_head(self, house_powers) -> float:
        """Fixed-order feeder-head reduction (ascending house order)."""
        total = 0.0
        for p in house_powers:
            total += p
        self.head.append(total)
        return total

    def step(self, step_index: int, price: float) -> float:
        """One full sequential step; returns P_L for the step."""
        ambient = self.weather.value_at(step_index)
        offset = self.offset_for(price)
        advance = self.advance_house
        return self.reduce_head(
            advance(i, step_index, ambient, offset) for i in range(self.n_houses)
        )

    def run(self) -> FeederRun:
        price_at = self.prices.value_at
        for t in range(self.n_steps):
            self.step(t, price_at(t))
        return self.result()

    def result(self) -> FeederRun:
        if len(self.head) != self.n_steps:
            raise RuntimeError(
                f"feeder {self.feeder.feeder_id}: {len(self.head)} of "
                f"{self.n_steps} steps recorded"
            )
        per_house = None
        if self.house_power is not None:
            per_house = tuple(
                LoadSeries("household", h.house_id, tuple(series))
                for h, series in zip(self.feeder.houses, self.house_power)
            )
        return FeederRun(
            self.feeder.feeder_id,
            LoadSeries("feeder_head", self.feeder.feeder_id, tuple(self.head)),
            per_house,
        )


def simulate_feeder(
    feeder: FeederLike,
    sim: SimulationConfig,
    collect_per_house: bool = False,
) -> FeederRun:
    """Sequential feeder simulation; the oracle every executor must match."""
    return FeederSimulation(materialize(feeder), sim, collect_per_house).run()


def simulate_sequential(
    feeders,
    sim: SimulationConfig,
    collect_per_house: bool = False,
) -> list[FeederRun]:
    """All feeders, one after another, ascending feeder_id."""
    ordered = sorted(feeders, key=lambda f: f.feeder_id)
    return [simulate_feeder(f, sim, collect_per_house) for f in ordered]


# --------------------------------------------------------------------------
# Synthetic exogenous inputs (used by gen-config and the bench harness)
# --------------------------------------------------------------------------


def synthetic_weather(
    n_steps: int,
    mean: float = 8.0,
    amplitude: float = 6.0,
    step_hours: float = 1.0,
    coldest_hour: float = 4.0,
) -> WeatherTape:
    """Sinusoidal diurnal temperature cycle."""
    import math

    values = []
    for t in range(n_steps):
        hour = (t * step_hours) % 24.0
        phase = 2.0 * math.pi * (hour - coldest_hour) / 24.0
        values.append(mean - amplitude * math.cos(phase))
    return WeatherTape(tuple(values))


def piecewise_prices(
    n_steps: int,
    base: float = 30.0,
    steps: tuple[tuple[int, float], ...] = (),
) -> PriceSeries:
    """Piecewise-constant prices: ``steps`` are (from_step, price) pairs."""
    values = [base] * n_steps
    for start, price in sorted(steps):
        if not 0 <= start < n_steps:
            raise ValueError(f"price step at {start} outside horizon")
        for t in range(start, n_steps):
            values[t] = price
    return PriceSeries(tuple(values))
