"""Bottom-up power distribution load simulator.

Household appliances are modeled physically (first-order thermal models
with deadband thermostats for HVAC, water heaters, and refrigerators;
scheduled Bernoulli switching for the rest), aggregated to household
and feeder-head load series, and executed by three interchangeable
executors: a sequential engine, a shared-memory house-partitioned
executor with per-step barriers, and a coordinator/worker executor
running one engine instance per feeder with minimized messaging.
All three produce bit-identical results for the same seed.
"""

from .appliances import (
    COOLING,
    HEATING,
    NonTcaSpec,
    StepSeries,
    TcaState,
    ThermalParams,
    ThermostatConfig,
    analytic_duty_cycle,
    evolve_temperature,
    next_inflection_time,
    non_tca_step,
    steady_state_temperature,
    tca_step,
)
from .coordinator import (
    CoordinatorResult,
    ExchangeSchedule,
    coordinator_run,
    count_messages,
    worker_run,
)
from .engine import (
    FeederRun,
    LoadSeries,
    PriceResponseConfig,
    PriceSeries,
    SimulationConfig,
    WeatherTape,
    piecewise_prices,
    price_offset,
    simulate_feeder,
    simulate_house_step,
    simulate_sequential,
    synthetic_weather,
)
from .messages import (
    AggregateReport,
    MessageStats,
    PriceBroadcast,
    Release,
    RunComplete,
    Shutdown,
    expected_total,
)
from .population import (
    FeederPlan,
    FeederSpec,
    HouseSpec,
    IntRange,
    PopulationConfig,
    PRESETS,
    TcaSpec,
    UniformRange,
    default_population,
    generate_feeder,
    generate_house,
    lean_population,
)
from .shared_exec import Partition, partition_houses, run_shared

__version__ = "0.1.0"
