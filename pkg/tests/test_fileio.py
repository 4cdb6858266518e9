import json

import pytest

from feedersim.engine import WeatherTape, simulate_sequential
from feedersim.fileio import (
    ConfigError,
    ParseError,
    feeder_plans,
    load_prices,
    load_results,
    load_run_config,
    load_weather,
    scaffold_config,
    write_house_results,
    write_prices,
    write_results,
    write_weather,
)
from feedersim.population import generate_feeder, lean_population


def _write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


# ---------------------------------------------------------------------------
# Weather files
# ---------------------------------------------------------------------------


def test_load_weather_happy_path(tmp_path):
    lines = ["hour,temperature_c"] + [f"{h},{h * 0.5}" for h in range(100)]
    tape = load_weather(_write(tmp_path, "w.csv", "\n".join(lines) + "\n"))
    assert len(tape.values) == 100
    assert tape.value_at(3) == 1.5


def test_load_weather_empty_data_section(tmp_path):
    with pytest.raises(ParseError, match="no records"):
        load_weather(_write(tmp_path, "w.csv", "hour,temperature_c\n"))


def test_load_weather_missing_header(tmp_path):
    with pytest.raises(ParseError, match="header"):
        load_weather(_write(tmp_path, "w.csv", "h,temp\n0,1\n"))


def test_load_weather_skipped_hour_names_line(tmp_path):
    text = "hour,temperature_c\n0,1.0\n1,1.0\n3,1.0\n"
    with pytest.raises(ParseError, match="line 4"):
        load_weather(_write(tmp_path, "w.csv", text))


def test_load_weather_non_numeric_names_line(tmp_path):
    text = "hour,temperature_c\n0,1.0\n1,warm\n"
    with pytest.raises(ParseError, match="line 3"):
        load_weather(_write(tmp_path, "w.csv", text))


def test_weather_roundtrip(tmp_path):
    tape = WeatherTape((1.5, -2.25, 0.1 + 0.2))
    path = tmp_path / "w.csv"
    write_weather(tape, path)
    assert load_weather(path).values == tape.values


# ---------------------------------------------------------------------------
# Price files
# ---------------------------------------------------------------------------


def test_load_prices_constant_has_no_change_points(tmp_path):
    lines = ["hour,price"] + [f"{h},30.0" for h in range(50)]
    series = load_prices(_write(tmp_path, "p.csv", "\n".join(lines) + "\n"))
    assert series.change_points() == ()


def test_load_prices_detects_change_points(tmp_path):
    values = [30.0] * 50
    for t in (10, 20, 30):
        for u in range(t, 50):
            values[u] = 30.0 + t
    lines = ["hour,price"] + [f"{h},{v}" for h, v in enumerate(values)]
    series = load_prices(_write(tmp_path, "p.csv", "\n".join(lines) + "\n"))
    assert series.change_points() == (10, 20, 30)


def test_load_prices_negative_names_line(tmp_path):
    text = "hour,price\n0,30.0\n1,-4.0\n"
    with pytest.raises(ParseError, match="line 3"):
        load_prices(_write(tmp_path, "p.csv", text))


def test_prices_roundtrip(tmp_path):
    from feedersim.engine import PriceSeries

    series = PriceSeries((30.0, 45.5, 0.123456789012345))
    path = tmp_path / "p.csv"
    write_prices(series, path)
    assert load_prices(path).values == series.values


# ---------------------------------------------------------------------------
# Results files
# ---------------------------------------------------------------------------


def test_results_roundtrip_bit_exact(tmp_path):
    pop = lean_population(42)
    feeders = [generate_feeder(pop, fid, 8) for fid in range(2)]
    from feedersim.engine import PriceSeries, SimulationConfig

    sim = SimulationConfig(
        weather=WeatherTape((0.0,) * 12),
        prices=PriceSeries((30.0,) * 12),
        horizon_hours=12.0,
    )
    runs = simulate_sequential(feeders, sim)
    path = tmp_path / "results.csv"
    write_results(runs, path)
    with open(path) as fh:
        rows = fh.read().splitlines()
    assert rows[0] == "hour,feeder_id,p_l_kw"
    assert len(rows) == 1 + 12 * 2
    loaded = load_results(path)
    for run in runs:
        assert loaded[run.feeder_id] == run.head.values


def test_house_results_rows(tmp_path):
    pop = lean_population(7)
    feeder = generate_feeder(pop, 0, 10)
    from feedersim.engine import PriceSeries, SimulationConfig

    sim = SimulationConfig(
        weather=WeatherTape((0.0,) * 100),
        prices=PriceSeries((30.0,) * 100),
    )
    runs = simulate_sequential([feeder], sim, collect_per_house=True)
    path = tmp_path / "houses.csv"
    write_house_results(runs, path)
    with open(path) as fh:
        rows = fh.read().splitlines()
    assert rows[0] == "hour,house_id,p_h_kw"
    assert len(rows) == 1 + 10 * 100


def test_house_results_require_collection(tmp_path):
    pop = lean_population(7)
    from feedersim.engine import PriceSeries, SimulationConfig

    sim = SimulationConfig(
        weather=WeatherTape((0.0,) * 5),
        prices=PriceSeries((30.0,) * 5),
        horizon_hours=5.0,
    )
    runs = simulate_sequential([generate_feeder(pop, 0, 2)], sim)
    with pytest.raises(ValueError, match="per-house"):
        write_house_results(runs, tmp_path / "h.csv")


# ---------------------------------------------------------------------------
# Run config
# ---------------------------------------------------------------------------


def test_minimal_config_fills_defaults(tmp_path):
    path = _write(tmp_path, "cfg.json", json.dumps({"seed": 7}))
    config = load_run_config(path)
    assert config.horizon_hours == 100.0
    assert config.step_hours == 1.0
    assert config.mode == "seq"
    assert config.sim.n_steps == 100
    assert config.population.master_seed == 7


def test_unknown_key_is_named(tmp_path):
    path = _write(tmp_path, "cfg.json", json.dumps({"seed": 1, "horzon": 5}))
    with pytest.raises(ConfigError, match="horzon"):
        load_run_config(path)


def test_nested_unknown_key_is_named(tmp_path):
    raw = {"seed": 1, "weather": {"daily_cycle": {"mean": 8, "amplitud": 6}}}
    path = _write(tmp_path, "cfg.json", json.dumps(raw))
    with pytest.raises(ConfigError, match="amplitud"):
        load_run_config(path)


def test_mp_without_feeders_is_an_error(tmp_path):
    path = _write(tmp_path, "cfg.json", json.dumps({"seed": 1, "mode": "mp"}))
    with pytest.raises(ConfigError, match="feeder"):
        load_run_config(path)


def test_mp_with_per_house_is_an_error(tmp_path):
    raw = {"seed": 1, "mode": "mp", "feeders": 2, "per_house": True}
    path = _write(tmp_path, "cfg.json", json.dumps(raw))
    with pytest.raises(ConfigError, match="per_house"):
        load_run_config(path)


def test_seed_is_required(tmp_path):
    path = _write(tmp_path, "cfg.json", json.dumps({"mode": "seq"}))
    with pytest.raises(ConfigError, match="seed"):
        load_run_config(path)


def test_missing_config_file():
    with pytest.raises(ConfigError, match="does not exist"):
        load_run_config("/nonexistent/cfg.json")


def test_invalid_json_is_config_error(tmp_path):
    path = _write(tmp_path, "cfg.json", "{not json")
    with pytest.raises(ConfigError, match="JSON"):
        load_run_config(path)


def test_config_with_file_inputs(tmp_path):
    weather_lines = ["hour,temperature_c"] + [f"{h},5.0" for h in range(100)]
    _write(tmp_path, "w.csv", "\n".join(weather_lines) + "\n")
    price_lines = ["hour,price"] + [f"{h},30.0" for h in range(100)]
    _write(tmp_path, "p.csv", "\n".join(price_lines) + "\n")
    raw = {"seed": 3, "weather": {"path": "w.csv"}, "prices": {"path": "p.csv"}}
    config = load_run_config(_write(tmp_path, "cfg.json", json.dumps(raw)))
    assert config.sim.weather.value_at(0) == 5.0


def test_config_referencing_missing_file(tmp_path):
    raw = {"seed": 3, "weather": {"path": "missing.csv"}}
    path = _write(tmp_path, "cfg.json", json.dumps(raw))
    with pytest.raises((ConfigError, FileNotFoundError)):
        load_run_config(path)


def test_config_with_explicit_archetypes(tmp_path):
    raw = {
        "seed": 9,
        "population": {
            "tca_archetypes": [{
                "name": "hvac", "mode": "heating",
                "thermal_resistance": [3, 5], "thermal_capacitance": [2, 3],
                "rated_power": [3, 5], "conversion_factor": [2.5, 3.5],
                "setpoint": [19, 22], "deadband": [1, 2],
            }],
            "non_tca_archetypes": [{
                "name": "lights", "rated_power": [0.2, 0.4],
                "schedule_template": [0.1] * 24,
            }],
        },
    }
    config = load_run_config(_write(tmp_path, "cfg.json", json.dumps(raw)))
    assert config.population.tca_archetypes[0].name == "hvac"
    assert config.population.non_tca_archetypes[0].name == "lights"
    plans = feeder_plans(config)
    assert len(plans) == 1 and plans[0].n_houses == 1000


def test_config_archetype_bad_range_is_named(tmp_path):
    raw = {
        "seed": 9,
        "population": {
            "tca_archetypes": [{
                "name": "hvac", "mode": "heating",
                "thermal_resistance": [5, 3], "thermal_capacitance": [2, 3],
                "rated_power": [3, 5], "conversion_factor": [2.5, 3.5],
                "setpoint": [19, 22], "deadband": [1, 2],
            }],
        },
    }
    path = _write(tmp_path, "cfg.json", json.dumps(raw))
    with pytest.raises(ConfigError, match="thermal_resistance"):
        load_run_config(path)


def test_config_bad_preset(tmp_path):
    raw = {"seed": 1, "population": {"preset": "mansion"}}
    path = _write(tmp_path, "cfg.json", json.dumps(raw))
    with pytest.raises(ConfigError, match="mansion"):
        load_run_config(path)


def test_config_schedule_forms(tmp_path):
    for schedule, ok in [
        ("end_only", True), ("per_step", True), ([10, 99], True),
        ("sometimes", False),
    ]:
        raw = {"seed": 1, "schedule": schedule}
        path = _write(tmp_path, "cfg.json", json.dumps(raw))
        if ok:
            assert load_run_config(path).schedule in ("end_only", "per_step", (10, 99))
        else:
            with pytest.raises(ConfigError, match="schedule"):
                load_run_config(path)


def test_scaffold_config_loads_clean(tmp_path):
    raw = scaffold_config(houses=25, feeders=2, seed=11, population="lean")
    path = _write(tmp_path, "cfg.json", json.dumps(raw))
    config = load_run_config(path)
    assert config.feeders == 2
    assert config.houses_per_feeder == 25
    assert config.sim.prices.change_points(100) == (25, 50, 75)


def test_malformed_corpus_never_crashes(tmp_path):
    """Every malformed fixture yields a structured error, never a
    crash or a silently defaulted run."""
    fixtures = [
        {"seed": "abc"},
        {"seed": 1, "mode": "turbo"},
        {"seed": 1, "workers": 0},
        {"seed": 1, "feeders": 0},
        {"seed": 1, "houses_per_feeder": -5},
        {"seed": 1, "transport": "carrier-pigeon"},
        {"seed": 1, "horizon_hours": 0},
        {"seed": 1, "horizon_hours": 10, "step_hours": 3},
        {"seed": 1, "prices": {"constant": -4}},
        {"seed": 1, "prices": {"steps": [[200, 10.0]]}},
        {"seed": 1, "weather": {"constant": 5, "daily_cycle": {"mean": 1, "amplitude": 1}}},
        {"seed": 1, "price_response": {"reference_price": 0, "slope": 1, "max_offset": 1}},
        {"seed": 1, "price_response": {"slope": 1}},
        {"seed": 1, "population": {"preset": "lean", "tca_archetypes": []}},
        {"seed": 1, "population": {"tca_archetypes": [], "non_tca_archetypes": []}},
    ]
    for i, raw in enumerate(fixtures):
        path = _write(tmp_path, f"bad{i}.json", json.dumps(raw))
        with pytest.raises(ConfigError):
            load_run_config(path)
