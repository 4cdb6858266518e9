import os

import hypothesis
import pytest

from feedersim.engine import (
    PriceSeries,
    SimulationConfig,
    WeatherTape,
    piecewise_prices,
    synthetic_weather,
)
from feedersim.population import generate_feeder, lean_population

hypothesis.settings.register_profile(
    "default", max_examples=50, deadline=None,
)
hypothesis.settings.register_profile(
    "fast", max_examples=10, deadline=None,
)
hypothesis.settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture(scope="session")
def sim100():
    """100 steps of 1 h, constant −2 °C weather, constant prices."""
    return SimulationConfig(
        weather=WeatherTape(tuple(-2.0 for _ in range(100))),
        prices=PriceSeries(tuple(30.0 for _ in range(100))),
    )


@pytest.fixture(scope="session")
def sim_diurnal():
    """100 steps with a daily weather cycle and three price changes."""
    return SimulationConfig(
        weather=synthetic_weather(100),
        prices=piecewise_prices(100, 30.0, ((25, 45.0), (50, 30.0), (75, 60.0))),
    )


@pytest.fixture(scope="session")
def small_feeder():
    """40 lean houses; big enough to exercise the machinery, fast."""
    return generate_feeder(lean_population(42), 0, 40)
