"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v``.  The scale smoke test
(criterion 10) takes several minutes; deselect it with ``-m "not scale"``
when iterating.
"""

import json
import math
import os
import random
import resource
import time

import pytest

from feedersim.appliances import (
    COOLING,
    HEATING,
    TcaState,
    ThermalParams,
    ThermostatConfig,
    analytic_duty_cycle,
    evolve_temperature,
    next_inflection_time,
    tca_step,
)
from feedersim.bench import (
    ExperimentSpec,
    effective_physical_cores,
    output_hash,
    physical_cores,
    run_feeder_scaling,
    run_granularity_sweep,
    run_linear_growth,
)
from feedersim.cli import main as cli_main
from feedersim.coordinator import coordinator_run
from feedersim.engine import (
    SimulationConfig,
    piecewise_prices,
    simulate_feeder,
    synthetic_weather,
)
from feedersim.messages import expected_total
from feedersim.population import FeederPlan, lean_population
from feedersim.rng import derive_seed, unit_draw

from oracles import bisect_crossing, euler_evolve

pytestmark = pytest.mark.acceptance


@pytest.fixture()
def report(capsys):
    def _report(criterion: str, ok: bool, detail: str = ""):
        with capsys.disabled():
            print(f"\n[{criterion}] {'PASS' if ok else 'FAIL'} {detail}")
        assert ok, f"{criterion}: {detail}"

    return _report


def _write_config(tmp_path, **overrides):
    raw = {
        "seed": 42,
        "horizon_hours": 100,
        "step_hours": 1,
        "mode": "seq",
        "feeders": 1,
        "houses_per_feeder": 1000,
        "population": {"preset": "default"},
        "weather": {"daily_cycle": {"mean": 8.0, "amplitude": 6.0}},
        "prices": {"base": 30.0, "steps": [[25, 45.0], [50, 30.0], [75, 60.0]]},
    }
    raw.update(overrides)
    path = tmp_path / "config.json"
    path.write_text(json.dumps(raw))
    return path


def test_criterion_1_executor_equivalence(tmp_path, report):
    """Seed 42, 1 feeder x 1000 houses, 100 steps: shared W in {1,2,4,8}
    and mp K=1 produce results CSVs byte-identical to seq."""
    config = _write_config(tmp_path)
    assert cli_main(["simulate", "--config", str(config),
                     "--out", str(tmp_path / "seq")]) == 0
    oracle = (tmp_path / "seq" / "results.csv").read_bytes()

    matched = []
    for w in (1, 2, 4, 8):
        out = tmp_path / f"shared{w}"
        assert cli_main(["simulate", "--config", str(config), "--mode", "shared",
                         "--workers", str(w), "--out", str(out)]) == 0
        matched.append((out / "results.csv").read_bytes() == oracle)
    out = tmp_path / "mp"
    assert cli_main(["simulate", "--config", str(config), "--mode", "mp",
                     "--out", str(out)]) == 0
    matched.append((out / "results.csv").read_bytes() == oracle)

    report(
        "AC-1 executor equivalence", all(matched),
        "shared W=1,2,4,8 and mp K=1 byte-identical to seq",
    )


def test_criterion_2_multi_feeder_aggregation(report):
    """5 feeders x 1000 houses in mp: global P_L equals the ordered sum
    of 5 independent sequential runs, bit-exact."""
    pop = lean_population(42)
    sim = SimulationConfig(
        weather=synthetic_weather(100), prices=piecewise_prices(100),
    )
    plans = [FeederPlan(pop, fid, 1000) for fid in range(5)]
    result = coordinator_run(plans, sim)
    independents = [simulate_feeder(p, sim) for p in plans]

    per_feeder_ok = all(
        got.head.values == want.head.values
        for got, want in zip(result.per_feeder, independents)
    )
    global_ok = True
    for t in range(sim.n_steps):
        ordered = 0.0
        for run in independents:
            ordered += run.head.values[t]
        if result.global_head.values[t] != ordered:
            global_ok = False
            break
    report(
        "AC-2 multi-feeder aggregation", per_feeder_ok and global_ok,
        "mp global == ordered sum of 5 sequential runs, bit-exact",
    )


def test_criterion_3_tca_physics_suite(report):
    """(a) closed form vs forward Euler (dt = R*C/1e5) within 1e-3 over
    500 cases; (b) inflection times vs bisection within 1e-6 h; (c)
    long-run duty cycle within 1% of analytic."""
    rng = random.Random(42)

    def draw_params():
        return ThermalParams(
            thermal_resistance=rng.uniform(1.0, 10.0),
            thermal_capacitance=rng.uniform(0.1, 5.0),
            rated_power=rng.uniform(0.5, 8.0),
            conversion_factor=rng.uniform(0.5, 3.5),
            mode=rng.choice([HEATING, COOLING]),
        )

    worst_evolve = 0.0
    for _ in range(500):
        params = draw_params()
        ambient = rng.uniform(-20.0, 40.0)
        t0 = rng.uniform(-10.0, 70.0)
        on = rng.random() < 0.5
        dt = rng.uniform(0.0, 10.0 * params.time_constant)
        exact = evolve_temperature(t0, params, ambient, on, dt)
        approx = euler_evolve(t0, params, ambient, on, dt,
                              params.time_constant / 1e5)
        worst_evolve = max(worst_evolve, abs(exact - approx))
    evolve_ok = worst_evolve < 1e-3

    worst_inflect = 0.0
    checked = 0
    while checked < 300:
        params = draw_params()
        ambient = rng.uniform(-20.0, 40.0)
        t0 = rng.uniform(-10.0, 70.0)
        on = rng.random() < 0.5
        from feedersim.appliances import steady_state_temperature

        t_ss = steady_state_temperature(params, ambient, on)
        if abs(t0 - t_ss) < 1e-3:
            continue
        target = t0 + rng.uniform(0.05, 0.95) * (t_ss - t0)
        t_star = next_inflection_time(t0, target, params, ambient, on)
        if t_star is None:
            continue
        oracle = bisect_crossing(
            t0, target, params, ambient, on,
            t_hi=max(t_star * 2, 1e-3), tol=1e-9,
        )
        worst_inflect = max(worst_inflect, abs(t_star - oracle))
        checked += 1
    inflect_ok = worst_inflect < 1e-6

    worst_duty = 0.0
    duty_cases = [
        (ThermalParams(2.0, 0.1, 5.0, 2.0, HEATING), 20.0, 2.0, 4.0),
        (ThermalParams(3.0, 0.05, 4.0, 3.0, HEATING), 21.0, 1.5, -5.0),
        (ThermalParams(80.0, 0.002, 0.2, 3.0, COOLING), 4.0, 2.0, 25.0),
    ]
    for params, setpoint, deadband, ambient in duty_cases:
        config = ThermostatConfig.fixed(setpoint, deadband)
        expected = analytic_duty_cycle(params, config, ambient)
        start = setpoint - deadband / 2 if params.mode == HEATING \
            else setpoint + deadband / 2
        horizon = 50.0
        _, energy, _ = tca_step(
            TcaState(start, True), params, config, ambient, horizon
        )
        measured = energy / params.rated_power / horizon
        worst_duty = max(worst_duty, abs(measured / expected - 1.0))
    duty_ok = worst_duty < 0.01

    report(
        "AC-3 TCA physics suite", evolve_ok and inflect_ok and duty_ok,
        f"euler max err {worst_evolve:.2e} C (<1e-3), "
        f"bisection max err {worst_inflect:.2e} h (<1e-6), "
        f"duty max rel err {worst_duty:.2%} (<1%)",
    )


def test_criterion_4_communication_bound(report):
    """End-only schedule, 3 price change-points: message counts equal
    K*(1+1+3) exactly for K in {1,5,10} and are independent of house
    count (10^2 vs 10^4 houses/feeder)."""
    pop = lean_population(42)
    sim = SimulationConfig(
        weather=synthetic_weather(100),
        prices=piecewise_prices(100, 30.0, ((25, 45.0), (50, 30.0), (75, 60.0))),
    )
    assert len(sim.prices.change_points(100)) == 3

    counts_ok = True
    details = []
    for k in (1, 5, 10):
        plans = [FeederPlan(pop, fid, 100) for fid in range(k)]
        stats = coordinator_run(plans, sim).message_stats
        want = expected_total(k, 1, 3)
        details.append(f"K={k}: {stats.total}=={want}")
        counts_ok &= stats.total == want
        counts_ok &= stats.price_broadcasts == 3 * k
        counts_ok &= stats.aggregate_reports == k
        counts_ok &= stats.run_completes == k

    small = coordinator_run(
        [FeederPlan(pop, fid, 100) for fid in range(5)], sim
    ).message_stats
    large = coordinator_run(
        [FeederPlan(pop, fid, 10_000) for fid in range(5)], sim,
        timeout_s=600.0,
    ).message_stats
    size_ok = small == large

    report(
        "AC-4 communication bound", counts_ok and size_ok,
        f"{'; '.join(details)}; stats identical at 10^2 vs 10^4 houses/feeder",
    )


def test_criterion_5_feeder_scaling_trend(report):
    """K feeders of 10^4 houses on K workers: wall ratio <= 1.25 for
    all K the machine can physically run in parallel.  Ratios for every
    K up to the logical CPU count are measured and reported."""
    logical = physical_cores()
    effective = effective_physical_cores()
    tested = sorted({k for k in (1, 2, 4, 8) if k <= logical})
    asserted = [k for k in tested if k <= effective]

    result = run_feeder_scaling(ExperimentSpec(
        kind="feeder_scaling", workers=tuple(tested), houses_per_feeder=10_000,
        repetitions=3, population="lean", transport="process", seed=42,
    ))
    ratios = result.wall_ratio_vs_1
    ok = all(ratios[k] <= 1.25 for k in asserted)
    ratio_text = ", ".join(f"K={k}: {ratios[k]:.3f}" for k in tested)
    note = "" if effective == logical else (
        f" (measured physical parallel capacity: {effective} of "
        f"{logical} logical CPUs; K>{effective} reported, not asserted)"
    )
    report(
        "AC-5 feeder scaling trend", ok,
        f"wall ratios vs K=1 -> {ratio_text}; asserted <=1.25 for "
        f"K in {asserted}{note}",
    )


def test_criterion_6_linear_growth_trend(report):
    """Sequential wall time vs houses in {1,2,4,8}*10^3: log-log slope
    within [0.8, 1.3]."""
    result = run_linear_growth(ExperimentSpec(
        kind="linear_growth", houses=(1000, 2000, 4000, 8000),
        repetitions=3, population="lean", seed=42,
    ))
    slope = result.growth_exponent
    report(
        "AC-6 linear growth trend", 0.8 <= slope <= 1.3,
        f"log-log slope {slope:.3f} in [0.8, 1.3]",
    )


def test_criterion_7_granularity_report(report, tmp_path):
    """The granularity sweep reports a knee (location informational)
    and per-step-schedule wall time >= end-only wall time at every
    worker count."""
    from feedersim.bench import emit_report

    result = run_granularity_sweep(ExperimentSpec(
        kind="granularity", workers=(1, 2, 4, 8), houses_total=3000,
        repetitions=5, population="lean", transport="process", seed=42,
    ))
    emit_report(result.rows, tmp_path / "report")
    report_exists = (tmp_path / "report" / "bench.csv").exists()

    schedule_ok = True
    pairs = []
    for w in sorted(result.end_only_wall):
        end_wall = result.end_only_wall[w]
        step_wall = result.per_step_wall[w]
        pairs.append(f"W={w}: {step_wall:.2f}s vs {end_wall:.2f}s")
        schedule_ok &= step_wall >= end_wall

    report(
        "AC-7 granularity report", report_exists and schedule_ok,
        f"knee at workers={result.knee_workers} (reported, not asserted); "
        f"per-step >= end-only at every count [{'; '.join(pairs)}]",
    )


def test_criterion_8_determinism(tmp_path, report):
    """Identical config and seed give byte-identical result CSVs and
    identical benchmark output hashes."""
    config = _write_config(
        tmp_path, mode="mp", feeders=2, houses_per_feeder=200,
        population={"preset": "lean"},
    )
    for name in ("r1", "r2"):
        assert cli_main(["simulate", "--config", str(config),
                         "--out", str(tmp_path / name)]) == 0
    csv_ok = (tmp_path / "r1" / "results.csv").read_bytes() == \
        (tmp_path / "r2" / "results.csv").read_bytes()

    spec = ExperimentSpec(
        kind="linear_growth", houses=(100,), repetitions=1,
        population="lean", seed=7, horizon_hours=20.0,
    )
    hash_a = run_linear_growth(spec).rows[0].output_hash
    hash_b = run_linear_growth(spec).rows[0].output_hash
    report(
        "AC-8 determinism", csv_ok and hash_a == hash_b,
        "repeat runs byte-identical; bench output hashes stable",
    )


def test_criterion_9_non_tca_statistics(report):
    """p = 0.3 over 1e5 seeded appliance-steps: on-fraction within
    0.300 +/- 0.005."""
    from feedersim.appliances import NonTcaSpec, StepSeries, non_tca_step

    spec = NonTcaSpec(1.0, StepSeries.constant(0.3))
    seed = derive_seed(42, "acceptance", "non-tca")
    n = 100_000
    hits = sum(
        non_tca_step(spec, i, unit_draw(seed, i), 1.0)[0] for i in range(n)
    )
    fraction = hits / n
    report(
        "AC-9 non-TCA statistics", abs(fraction - 0.300) <= 0.005,
        f"on-fraction {fraction:.4f} within 0.300 +/- 0.005",
    )


@pytest.mark.scale
def test_criterion_10_scale_smoke(report):
    """10^6 houses across 100 feeders in mp mode for 100 steps:
    completes within an 8 GB RSS budget; wall time recorded."""
    pop = lean_population(42)
    sim = SimulationConfig(
        weather=synthetic_weather(100), prices=piecewise_prices(100),
    )
    plans = [FeederPlan(pop, fid, 10_000) for fid in range(100)]
    t0 = time.perf_counter()
    result = coordinator_run(plans, sim, timeout_s=3600.0)
    wall = time.perf_counter() - t0
    rss_gb = max(
        resource.getrusage(resource.RUSAGE_SELF).ru_maxrss,
        resource.getrusage(resource.RUSAGE_CHILDREN).ru_maxrss,
    ) / 1024 / 1024
    completed = (
        len(result.per_feeder) == 100
        and all(len(r.head.values) == 100 for r in result.per_feeder)
        and all(v >= 0 for v in result.global_head.values)
    )
    report(
        "AC-10 scale smoke", completed and rss_gb < 8.0,
        f"10^6 houses / 100 feeders / 100 steps in {wall/60:.1f} min "
        f"({os.cpu_count()} CPUs), max RSS {rss_gb:.2f} GB < 8 GB",
    )
