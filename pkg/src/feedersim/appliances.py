"""Physically-based household appliance models.

Appliances come in two families:

* Thermostatically controlled appliances (TCAs): HVAC, electric water
  heaters, refrigerators.  Each is a single-node lumped thermal model

      C * dT/dt = (T_ambient - T) / R + s * eta * P_rated    [while on]

  with s = +1 for heating equipment and s = -1 for cooling.  Between
  switching events the solution is an exponential approach to a
  steady-state temperature:

      T_ss(on)  = ambient + s * eta * P_rated * R
      T_ss(off) = ambient
      T(t)      = T_ss + (T0 - T_ss) * exp(-t / (R * C))

  The thermostat holds state inside a deadband [setpoint - delta/2,
  setpoint + delta/2] and toggles at the band edges.  Edge-crossing
  times are solved analytically, so stepping a TCA is an exact event
  loop: no integration error, and the energy drawn over a step is
  exactly rated power times on-time.

* Non-thermostatic appliances (dishwashers, washers/dryers, ranges,
  lighting): on for a whole step with a scheduled probability, decided
  by one uniform draw per step.

All functions here are pure: state goes in, new state comes out, and
random draws are explicit arguments.  They are safe to call from any
number of threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

HEATING = "heating"
COOLING = "cooling"


@dataclass(frozen=True, slots=True)
class StepSeries:
    """Piecewise-constant per-step series (setpoints, probabilities).

    ``cyclic`` series repeat their values forever, which keeps diurnal
    templates compact no matter how long the simulation horizon is.
    Non-cyclic series raise on out-of-range access.
    """

    values: tuple[float, ...]
    cyclic: bool = False

    def __post_init__(self) -> None:
        if not self.values:
            raise ValueError("StepSeries needs at least one value")

    @classmethod
    def constant(cls, value: float) -> "StepSeries":
        return cls((float(value),), cyclic=True)

    @classmethod
    def daily(cls, values) -> "StepSeries":
        """Repeating template, typically 24 hourly values."""
        return cls(tuple(float(v) for v in values), cyclic=True)

    def value_at(self, step: int) -> float:
        if step < 0:
            raise IndexError(f"step index {step} is negative")
        n = len(self.values)
        if self.cyclic:
            return self.values[step % n]
        if step >= n:
            raise IndexError(
                f"step index {step} outside schedule of length {n}"
            )
        return self.values[step]

    def covers(self, n_steps: int) -> bool:
        return self.cyclic or len(self.values) >= n_steps


@dataclass(frozen=True, slots=True)
class ThermalParams:
    """Physical parameters of one TCA.

    thermal_resistance    °C per kW of heat flow (envelope/tank losses)
    thermal_capacitance   kWh per °C of thermal mass
    rated_power           electrical draw while on, kW
    conversion_factor     heat moved per kW electric (COP-like, > 0)
    mode                  "heating" drives temperature up while on,
                          "cooling" drives it down
    """

    thermal_resistance: float
    thermal_capacitance: float
    rated_power: float
    conversion_factor: float
    mode: str = HEATING

    def __post_init__(self) -> None:
        if self.thermal_resistance <= 0:
            raise ValueError("thermal_resistance must be > 0")
        if self.thermal_capacitance <= 0:
            raise ValueError("thermal_capacitance must be > 0")
        if self.rated_power <= 0:
            raise ValueError("rated_power must be > 0")
        if self.conversion_factor <= 0:
            raise ValueError("conversion_factor must be > 0")
        if self.mode not in (HEATING, COOLING):
            raise ValueError(f"mode must be {HEATING!r} or {COOLING!r}")

    @property
    def time_constant(self) -> float:
        """R*C in hours."""
        return self.thermal_resistance * self.thermal_capacitance

    @property
    def heat_gain(self) -> float:
        """Signed temperature lift above ambient at steady state while on."""
        gain = self.conversion_factor * self.rated_power * self.thermal_resistance
        return gain if self.mode == HEATING else -gain


@dataclass(frozen=True, slots=True)
class ThermostatConfig:
    """Deadband thermostat: setpoint schedule plus full band width."""

    setpoint_sequence: StepSeries
    deadband: float

    def __post_init__(self) -> None:
        if self.deadband <= 0:
            raise ValueError("deadband must be > 0")

    @classmethod
    def fixed(cls, setpoint: float, deadband: float) -> "ThermostatConfig":
        return cls(StepSeries.constant(setpoint), deadband)


class TcaState(NamedTuple):
    """Runtime state of one TCA: internal temperature and on/off."""

    temperature: float
    is_on: bool


@dataclass(frozen=True, slots=True)
class NonTcaSpec:
    """Stochastically switched appliance.

    ``on_probability_schedule`` gives the per-step probability of being
    on; ``stream_seed`` keys the appliance's private draw stream (see
    :mod:`feedersim.rng`).
    """

    rated_power: float
    on_probability_schedule: StepSeries
    stream_seed: int = 0

    def __post_init__(self) -> None:
        if self.rated_power <= 0:
            raise ValueError("rated_power must be > 0")
        for p in self.on_probability_schedule.values:
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"on-probability {p} outside [0, 1]")


def steady_state_temperature(
    params: ThermalParams, ambient: float, is_on: bool
) -> float:
    """Asymptote of the exponential model: ambient, lifted by the
    signed heat gain while the appliance runs."""
    if is_on:
        return ambient + params.heat_gain
    return ambient


def evolve_temperature(
    t0: float, params: ThermalParams, ambient: float, is_on: bool, dt: float
) -> float:
    """Closed-form temperature after ``dt`` hours at constant ambient."""
    if dt < 0:
        raise ValueError(f"dt must be >= 0, got {dt}")
    if dt == 0:
        return t0
    t_ss = steady_state_temperature(params, ambient, is_on)
    return t_ss + (t0 - t_ss) * math.exp(-dt / params.time_constant)


def next_inflection_time(
    t0: float,
    target: float,
    params: ThermalParams,
    ambient: float,
    is_on: bool,
) -> float | None:
    """Hours until the trajectory from ``t0`` crosses ``target``.

    Returns ``None`` ("unreachable") when the target sits at or beyond
    the steady-state asymptote, or when the trajectory is moving away
    from it.  ``t0 == target`` counts as an immediate crossing (0 h).
    """
    if t0 == target:
        return 0.0
    t_ss = steady_state_temperature(params, ambient, is_on)
    num = t0 - t_ss
    den = target - t_ss
    if num == 0.0 or den == 0.0:
        return None  # no driving force, or target at the asymptote
    q = num / den
    if q < 1.0:
        return None  # opposite side of T_ss, or already past and receding
    return params.time_constant * math.log(q)


def tca_step(
    state: TcaState,
    params: ThermalParams,
    config: ThermostatConfig,
    ambient: float,
    dt: float,
    step_index: int = 0,
    setpoint_offset: float = 0.0,
) -> tuple[TcaState, float, float]:
    """Advance one TCA across a step of ``dt`` hours.

    Runs the exact event loop: find the next band-edge crossing, toggle,
    repeat until the step is used up.  ``setpoint_offset`` is the
    price-response comfort offset; it lowers the effective setpoint for
    heating equipment and raises it for cooling, so a positive offset
    always sheds load.

    Returns (end-of-step state, energy in kWh, mean power in kW).  The
    energy is exact: rated power times analytically measured on-time.
    """
    if dt <= 0:
        raise ValueError(f"dt must be > 0, got {dt}")
    heating = params.mode == HEATING
    setpoint = config.setpoint_sequence.value_at(step_index)
    if heating:
        setpoint -= setpoint_offset
    else:
        setpoint += setpoint_offset
    half = config.deadband / 2.0
    lower = setpoint - half
    upper = setpoint + half

    # Inlined time_constant / heat_gain: this loop dominates large runs.
    r = params.thermal_resistance
    rc = r * params.thermal_capacitance
    gain = params.conversion_factor * params.rated_power * r
    if not heating:
        gain = -gain
    temp = state.temperature
    on = state.is_on
    remaining = dt
    on_time = 0.0

    while True:
        # Toggle edge for the current phase, and whether we are already
        # at or past it (a tie fires immediately).
        if heating:
            target = upper if on else lower
            past = temp >= upper if on else temp <= lower
        else:
            target = lower if on else upper
            past = temp <= lower if on else temp >= upper
        if past:
            # Band width > 0 guarantees the toggled phase is not also
            # past its own edge, so this cannot loop.
            on = not on
            continue

        t_ss = ambient + gain if on else ambient
        num = temp - t_ss
        den = target - t_ss
        crossing = None
        if num != 0.0 and den != 0.0:
            q = num / den
            if q >= 1.0:
                crossing = rc * math.log(q)

        if crossing is None or crossing > remaining:
            # Saturated (undersized equipment) or the step ends first:
            # run out the clock in the current phase.
            temp = t_ss + (temp - t_ss) * math.exp(-remaining / rc)
            if on:
                on_time += remaining
            break

        # Event: land exactly on the band edge and toggle.
        if on:
            on_time += crossing
        remaining -= crossing
        temp = target
        on = not on
        if remaining <= 0.0:
            break

    energy = params.rated_power * on_time
    return TcaState(temp, on), energy, energy / dt


def non_tca_step(
    spec: NonTcaSpec,
    step_index: int,
    random_draw: float,
    dt: float,
) -> tuple[bool, float, float]:
    """One Bernoulli step: on for the whole step iff draw < p[step]."""
    if dt <= 0:
        raise ValueError(f"dt must be > 0, got {dt}")
    p = spec.on_probability_schedule.value_at(step_index)
    is_on = random_draw < p
    energy = spec.rated_power * dt if is_on else 0.0
    return is_on, energy, energy / dt


def analytic_duty_cycle(
    params: ThermalParams, config: ThermostatConfig, ambient: float,
    *, step_index: int = 0,
) -> float:
    """Long-run on-fraction of a cycling TCA from the two crossing times.

    Only defined when the appliance can actually cycle, i.e. the on
    trajectory crosses the far band edge and the off trajectory crosses
    the near one.
    """
    setpoint = config.setpoint_sequence.value_at(step_index)
    half = config.deadband / 2.0
    lower, upper = setpoint - half, setpoint + half
    if params.mode == HEATING:
        start_on, end_on = lower, upper
    else:
        start_on, end_on = upper, lower
    t_on = next_inflection_time(start_on, end_on, params, ambient, True)
    t_off = next_inflection_time(end_on, start_on, params, ambient, False)
    if t_on is None or t_off is None or t_on <= 0 or t_off <= 0:
        raise ValueError("appliance cannot cycle under these conditions")
    return t_on / (t_on + t_off)
