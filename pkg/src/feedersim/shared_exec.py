"""Shared-memory executor: house partitioning with per-step barriers.

Houses from all feeders are laid out in one global order (ascending
feeder_id, then ascending house_id) and split into contiguous,
near-equal ranges, one per worker thread.  Within a step each worker
advances only its own range and writes household powers into its own
slots of a shared buffer, so the compute phase needs no locks.  One
barrier ends the step; the barrier action performs the deterministic
ascending-order feeder-head reduction before anyone starts the next
step, which makes the output bit-identical to the sequential engine.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass

from .engine import FeederRun, FeederSimulation, SimulationConfig
from .population import materialize


@dataclass(frozen=True, slots=True)
class Partition:
    """Contiguous [start, stop) house ranges, one per worker."""

    ranges: tuple[tuple[int, int], ...]

    def __post_init__(self) -> None:
        expected = 0
        sizes = []
        for start, stop in self.ranges:
            if start != expected or stop < start:
                raise ValueError(f"ranges not contiguous at {start}:{stop}")
            sizes.append(stop - start)
            expected = stop
        if sizes and max(sizes) - min(sizes) > 1:
            raise ValueError(f"unbalanced partition sizes {sizes}")

    @property
    def n_houses(self) -> int:
        return self.ranges[-1][1] if self.ranges else 0

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(stop - start for start, stop in self.ranges)


def partition_houses(n_houses: int, n_workers: int) -> Partition:
    """Even contiguous split: the first n_houses % n_workers workers
    take one extra house."""
    if n_workers < 1:
        raise ValueError("n_workers must be >= 1")
    if n_houses < 0:
        raise ValueError("n_houses must be >= 0")
    base, extra = divmod(n_houses, n_workers)
    ranges = []
    start = 0
    for w in range(n_workers):
        size = base + (1 if w < extra else 0)
        ranges.append((start, start + size))
        start += size
    return Partition(tuple(ranges))


@dataclass(slots=True)
class SharedRunResult:
    per_feeder: list[FeederRun]
    barrier_count: int
    partition: Partition


def run_shared(
    feeders,
    sim: SimulationConfig,
    n_workers: int,
    collect_per_house: bool = False,
) -> SharedRunResult:
    """Run feeders under the shared-memory executor.

    Returns per-feeder runs (ascending feeder_id) plus the number of
    barrier synchronizations, which is exactly the number of steps.
    """
    if n_workers < 1:
        raise ValueError("n_workers must be >= 1")
    specs = sorted((materialize(f) for f in feeders), key=lambda f: f.feeder_id)
    seen = set()
    for f in specs:
        if f.feeder_id in seen:
            raise ValueError(f"duplicate feeder_id {f.feeder_id}")
        seen.add(f.feeder_id)

    sims = [FeederSimulation(f, sim, collect_per_house) for f in specs]
    n_steps = sim.n_steps

    # Per-step exogenous inputs, resolved once and shared read-only.
    ambients = [
        [fs.weather.value_at(t) for t in range(n_steps)] for fs in sims
    ]
    offsets = [
        [fs.offset_for(fs.prices.value_at(t)) for t in range(n_steps)]
        for fs in sims
    ]

    # Global house order: feeders ascending, houses ascending within.
    flat = [
        (fs, i, ambients[k], offsets[k])
        for k, fs in enumerate(sims)
        for i in range(fs.n_houses)
    ]
    partition = partition_houses(len(flat), n_workers)

    house_power = [0.0] * len(flat)  # disjoint write sets per worker
    barrier_count = 0
    failures: list[tuple[int, BaseException]] = []
    failure_lock = threading.Lock()

    def end_of_step() -> None:
        """Barrier action: runs once per step, after every worker has
        finished its range and before any worker proceeds."""
        nonlocal barrier_count
        pos = 0
        for fs in sims:
            n = fs.n_houses
            fs.reduce_head(house_power[pos:pos + n])
            pos += n
        barrier_count += 1

    barrier = threading.Barrier(n_workers, action=end_of_step)

    def worker(worker_index: int, start: int, stop: int) -> None:
        my_houses = flat[start:stop]
        try:
            for t in range(n_steps):
                buf = start
                for fs, i, ambient_series, offset_series in my_houses:
                    house_power[buf] = fs.advance_house(
                        i, t, ambient_series[t], offset_series[t]
                    )
                    buf += 1
                barrier.wait()
        except threading.BrokenBarrierError:
            return  # another worker failed; it recorded the cause
        except BaseException as exc:  # noqa: BLE001 - must surface worker faults
            with failure_lock:
                failures.append((worker_index, exc))
            barrier.abort()

    threads = [
        threading.Thread(
            target=worker, args=(w, start, stop),
            name=f"shared-worker-{w}", daemon=True,
        )
        for w, (start, stop) in enumerate(partition.ranges)
    ]
    for th in threads:
        th.start()
    for th in threads:
        th.join()

    if failures:
        w, exc = failures[0]
        raise RuntimeError(f"shared worker {w} failed: {exc!r}") from exc
    if barrier_count != n_steps:
        raise RuntimeError(
            f"barrier count {barrier_count} != steps {n_steps}"
        )
    return SharedRunResult(
        per_feeder=[fs.result() for fs in sims],
        barrier_count=barrier_count,
        partition=partition,
    )
