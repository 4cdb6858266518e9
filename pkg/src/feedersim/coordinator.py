"""Coordinator/worker executor: one engine instance per feeder.

One coordinator and K workers.  Each worker owns a full feeder
simulation in its own memory; the only cross-agent traffic is the
message contract in :mod:`feedersim.messages`: price broadcasts go out
when the market price changes, aggregated feeder-head series come back
at scheduled collection points, and a RunComplete ends each worker's
run.  Traffic is therefore independent of how many houses anyone
simulates.

Two transports honor the same contract: in-process worker threads over
queues (the default), and one OS process per feeder speaking the
length-prefixed binary protocol over pipes (``transport="process"``,
the faithful analog of one simulator instance per processor).
"""

from __future__ import annotations

import os
import queue
import select
import threading
import time
from dataclasses import dataclass, field

from .engine import FeederRun, FeederSimulation, LoadSeries, SimulationConfig
from .messages import (
    AggregateReport,
    Message,
    MessageStats,
    PREFIX_SIZE,
    PriceBroadcast,
    Release,
    RunComplete,
    Shutdown,
    decode_body,
    encode,
    frame_length,
)
from .population import FeederLike, materialize

DEFAULT_TIMEOUT_S = 60.0
_POLL_S = 0.05


class ChannelClosed(RuntimeError):
    """The peer went away mid-run."""


class WorkerAborted(RuntimeError):
    """Coordinator told this worker to stop."""


@dataclass(frozen=True, slots=True)
class ExchangeSchedule:
    """Collection points: step indexes where workers report and wait.

    The last point is always the final step, so every run ends fully
    collected.
    """

    collection_points: tuple[int, ...]

    def __post_init__(self) -> None:
        pts = self.collection_points
        if not pts:
            raise ValueError("schedule needs at least one collection point")
        if any(b <= a for a, b in zip(pts, pts[1:])):
            raise ValueError("collection points must be strictly increasing")
        if pts[0] < 0:
            raise ValueError("collection points must be >= 0")

    @classmethod
    def end_only(cls, n_steps: int) -> "ExchangeSchedule":
        return cls((n_steps - 1,))

    @classmethod
    def every_step(cls, n_steps: int) -> "ExchangeSchedule":
        return cls(tuple(range(n_steps)))

    def validate_for(self, n_steps: int) -> None:
        if self.collection_points[-1] != n_steps - 1:
            raise ValueError(
                f"last collection point {self.collection_points[-1]} must "
                f"be the final step {n_steps - 1}"
            )


# --------------------------------------------------------------------------
# Channels
# --------------------------------------------------------------------------


class ThreadChannel:
    """Ordered reliable in-process channel."""

    def __init__(self) -> None:
        self._q: queue.Queue[Message] = queue.Queue()

    def send(self, msg: Message) -> None:
        self._q.put(msg)

    def recv(self, timeout: float | None = None) -> Message:
        try:
            return self._q.get(timeout=timeout)
        except queue.Empty:
            raise TimeoutError("no message within timeout") from None

    def try_recv(self) -> Message | None:
        try:
            return self._q.get_nowait()
        except queue.Empty:
            return None


class PipeChannel:
    """One direction of the binary protocol over an OS pipe."""

    def __init__(self, read_fd: int | None, write_fd: int | None) -> None:
        self._read_fd = read_fd
        self._write_fd = write_fd
        self._buf = b""

    def send(self, msg: Message) -> None:
        if self._write_fd is None:
            raise ChannelClosed("channel is receive-only")
        data = encode(msg)
        view = memoryview(data)
        while view:
            try:
                n = os.write(self._write_fd, view)
            except (BrokenPipeError, OSError) as exc:
                raise ChannelClosed(f"peer pipe closed: {exc}") from exc
            view = view[n:]

    def _fill(self, needed: int, deadline: float | None) -> bool:
        while len(self._buf) < needed:
            if deadline is not None:
                remaining = deadline - time.monotonic()
                if remaining <= 0:
                    return False
                ready, _, _ = select.select([self._read_fd], [], [], remaining)
                if not ready:
                    return False
            chunk = os.read(self._read_fd, 65536)
            if not chunk:
                raise ChannelClosed("pipe closed by peer")
            self._buf += chunk
        return True

    def recv(self, timeout: float | None = None) -> Message:
        if self._read_fd is None:
            raise ChannelClosed("channel is send-only")
        deadline = None if timeout is None else time.monotonic() + timeout
        if not self._fill(PREFIX_SIZE, deadline):
            raise TimeoutError("no message within timeout")
        body_len = frame_length(self._buf[:PREFIX_SIZE])
        if not self._fill(PREFIX_SIZE + body_len, deadline):
            raise TimeoutError("incomplete message within timeout")
        body = self._buf[PREFIX_SIZE:PREFIX_SIZE + body_len]
        self._buf = self._buf[PREFIX_SIZE + body_len:]
        return decode_body(body)

    def try_recv(self) -> Message | None:
        if self._read_fd is None:
            return None
        # Non-blocking: only pull what is already available.
        while True:
            have = len(self._buf)
            if have >= PREFIX_SIZE:
                body_len = frame_length(self._buf[:PREFIX_SIZE])
                if have >= PREFIX_SIZE + body_len:
                    body = self._buf[PREFIX_SIZE:PREFIX_SIZE + body_len]
                    self._buf = self._buf[PREFIX_SIZE + body_len:]
                    return decode_body(body)
            ready, _, _ = select.select([self._read_fd], [], [], 0)
            if not ready:
                return None
            chunk = os.read(self._read_fd, 65536)
            if not chunk:
                raise ChannelClosed("pipe closed by peer")
            self._buf += chunk

    def close(self) -> None:
        for fd in (self._read_fd, self._write_fd):
            if fd is not None:
                try:
                    os.close(fd)
                except OSError:
                    pass
        self._read_fd = self._write_fd = None


# --------------------------------------------------------------------------
# Worker
# --------------------------------------------------------------------------


def worker_run(
    feeder: FeederLike,
    sim: SimulationConfig,
    schedule: ExchangeSchedule,
    inbox,
    outbox,
    trace: list | None = None,
) -> FeederRun:
    """Simulate one feeder, honoring the message contract.

    The effective market price starts at the step-0 value from the
    worker's own input data and changes only through PriceBroadcasts
    (unless the feeder carries a dedicated price series, in which case
    its local data wins and broadcasts are ignored).  At every
    collection point the worker reports all steps since the previous
    point and blocks until the coordinator releases it.
    """
    spec = materialize(feeder)
    fs = FeederSimulation(spec, sim)
    schedule.validate_for(fs.n_steps)
    own_prices = spec.price_id is not None
    price = fs.prices.value_at(0)
    pending: dict[int, float] = {}
    points = schedule.collection_points
    next_point = 0
    segment_start = 0

    def drain() -> None:
        while True:
            msg = inbox.try_recv()
            if msg is None:
                return
            if isinstance(msg, PriceBroadcast):
                pending[msg.step_index] = msg.price
            elif isinstance(msg, Shutdown):
                raise WorkerAborted(f"feeder {spec.feeder_id} shut down mid-run")
            else:
                raise RuntimeError(f"unexpected message while stepping: {msg!r}")

    for t in range(fs.n_steps):
        drain()
        if own_prices:
            price = fs.prices.value_at(t)
        elif t in pending:
            price = pending.pop(t)
        if trace is not None:
            trace.append(("step", t))
        fs.step(t, price)

        if next_point < len(points) and t == points[next_point]:
            outbox.send(AggregateReport(
                spec.feeder_id, segment_start, tuple(fs.head[segment_start:t + 1]),
            ))
            if trace is not None:
                trace.append(("report", next_point))
            while True:
                msg = inbox.recv()
                if isinstance(msg, Release):
                    if msg.point_index != next_point:
                        raise RuntimeError(
                            f"release for point {msg.point_index}, "
                            f"expected {next_point}"
                        )
                    break
                if isinstance(msg, PriceBroadcast):
                    pending[msg.step_index] = msg.price
                elif isinstance(msg, Shutdown):
                    raise WorkerAborted(
                        f"feeder {spec.feeder_id} shut down at point {next_point}"
                    )
                else:
                    raise RuntimeError(f"unexpected message at sync: {msg!r}")
            if trace is not None:
                trace.append(("release", next_point))
            segment_start = t + 1
            next_point += 1

    outbox.send(RunComplete(spec.feeder_id))
    return fs.result()


# --------------------------------------------------------------------------
# Worker handles (transport-specific lifecycle around the same contract)
# --------------------------------------------------------------------------


class _ThreadWorker:
    def __init__(self, feeder: FeederLike, sim, schedule, want_trace: bool):
        self.feeder_id = feeder.feeder_id
        self.to_worker = ThreadChannel()
        self.from_worker = ThreadChannel()
        self.trace: list | None = [] if want_trace else None
        self.error: BaseException | None = None
        self._thread = threading.Thread(
            target=self._main, args=(feeder, sim, schedule),
            name=f"feeder-worker-{self.feeder_id}", daemon=True,
        )
        self._thread.start()

    def _main(self, feeder, sim, schedule) -> None:
        try:
            worker_run(
                feeder, sim, schedule, self.to_worker, self.from_worker,
                trace=self.trace,
            )
        except WorkerAborted:
            pass
        except BaseException as exc:  # noqa: BLE001 - reported to coordinator
            self.error = exc

    def send(self, msg: Message) -> None:
        self.to_worker.send(msg)

    def recv(self, timeout: float) -> Message:
        deadline = time.monotonic() + timeout
        while True:
            if self.error is not None:
                raise RuntimeError(
                    f"worker for feeder {self.feeder_id} failed: {self.error!r}"
                ) from self.error
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                raise TimeoutError(
                    f"no report from feeder {self.feeder_id} within {timeout} s"
                )
            try:
                return self.from_worker.recv(timeout=min(_POLL_S, remaining))
            except TimeoutError:
                continue

    def shutdown(self) -> None:
        self.to_worker.send(Shutdown())

    def join(self, timeout: float) -> None:
        self._thread.join(timeout)
        if self.error is not None:
            raise RuntimeError(
                f"worker for feeder {self.feeder_id} failed: {self.error!r}"
            ) from self.error


def _process_worker_main(
    read_fd: int, write_fd: int, feeder, sim, schedule, parent_fds
) -> None:
    for fd in parent_fds:  # inherited parent pipe ends are not ours
        try:
            os.close(fd)
        except OSError:
            pass
    inbox = PipeChannel(read_fd, None)
    outbox = PipeChannel(None, write_fd)
    try:
        worker_run(feeder, sim, schedule, inbox, outbox)
    except (WorkerAborted, ChannelClosed):
        os._exit(0)
    except Exception:
        import traceback

        traceback.print_exc()
        os._exit(1)
    os._exit(0)


class _ProcessWorker:
    def __init__(self, feeder: FeederLike, sim, schedule, mp_context):
        self.feeder_id = feeder.feeder_id
        self.trace = None  # traces live in the child; use threads to inspect
        c2w_r, c2w_w = os.pipe()
        w2c_r, w2c_w = os.pipe()
        self._proc = mp_context.Process(
            target=_process_worker_main,
            args=(c2w_r, w2c_w, feeder, sim, schedule, (c2w_w, w2c_r)),
            name=f"feeder-worker-{self.feeder_id}",
            daemon=True,
        )
        self._proc.start()
        os.close(c2w_r)
        os.close(w2c_w)
        self._to_worker = PipeChannel(None, c2w_w)
        self._from_worker = PipeChannel(w2c_r, None)

    def send(self, msg: Message) -> None:
        try:
            self._to_worker.send(msg)
        except ChannelClosed as exc:
            raise RuntimeError(
                f"worker process for feeder {self.feeder_id} is gone: {exc}"
            ) from exc

    def recv(self, timeout: float) -> Message:
        try:
            return self._from_worker.recv(timeout)
        except ChannelClosed as exc:
            code = self._proc.exitcode
            raise RuntimeError(
                f"worker process for feeder {self.feeder_id} exited "
                f"(code {code}) before reporting"
            ) from exc
        except TimeoutError:
            raise TimeoutError(
                f"no report from feeder {self.feeder_id} within {timeout} s"
            ) from None

    def shutdown(self) -> None:
        try:
            self._to_worker.send(Shutdown())
        except (RuntimeError, ChannelClosed):
            pass

    def join(self, timeout: float) -> None:
        self._proc.join(timeout)
        if self._proc.is_alive():
            self._proc.terminate()
            self._proc.join(5.0)
            raise RuntimeError(
                f"worker process for feeder {self.feeder_id} had to be killed"
            )
        self._to_worker.close()
        self._from_worker.close()
        if self._proc.exitcode != 0:
            raise RuntimeError(
                f"worker process for feeder {self.feeder_id} exited "
                f"with code {self._proc.exitcode}"
            )


def _make_workers(feeders, sim, schedule, transport: str, want_trace: bool):
    if transport == "thread":
        return [_ThreadWorker(f, sim, schedule, want_trace) for f in feeders]
    if transport == "process":
        import multiprocessing

        try:
            ctx = multiprocessing.get_context("fork")
        except ValueError:  # pragma: no cover
            raise RuntimeError(
                "the process transport needs POSIX fork (pipe fds are "
                "inherited, not pickled)"
            ) from None
        return [_ProcessWorker(f, sim, schedule, ctx) for f in feeders]
    raise ValueError(f"unknown transport {transport!r}")


# --------------------------------------------------------------------------
# Coordinator
# --------------------------------------------------------------------------


@dataclass(slots=True)
class CoordinatorResult:
    global_head: LoadSeries
    per_feeder: list[FeederRun]
    message_stats: MessageStats
    worker_traces: dict[int, list] = field(default_factory=dict)


def coordinator_run(
    feeders,
    sim: SimulationConfig,
    schedule: ExchangeSchedule | None = None,
    *,
    transport: str = "thread",
    timeout_s: float = DEFAULT_TIMEOUT_S,
    want_traces: bool = False,
) -> CoordinatorResult:
    """Run K feeders on K workers and aggregate at the coordinator.

    The coordinator never simulates; it broadcasts price changes,
    absorbs scheduled reports (releasing all workers once a point is
    fully collected), and sums feeder heads in ascending feeder_id
    order into the global series.
    """
    feeders = sorted(feeders, key=lambda f: f.feeder_id)
    if not feeders:
        raise ValueError("coordinator_run needs at least one feeder")
    ids = [f.feeder_id for f in feeders]
    if len(set(ids)) != len(ids):
        raise ValueError(f"duplicate feeder ids in {ids}")

    n_steps = sim.n_steps
    if schedule is None:
        schedule = ExchangeSchedule.end_only(n_steps)
    schedule.validate_for(n_steps)
    points = schedule.collection_points

    broadcasts = [
        PriceBroadcast(t, sim.prices.value_at(t))
        for t in sim.prices.change_points(n_steps)
    ]

    stats = MessageStats()
    workers = _make_workers(feeders, sim, schedule, transport, want_traces)
    segments: dict[int, list[tuple[int, tuple[float, ...]]]] = {
        fid: [] for fid in ids
    }
    try:
        for w in workers:
            for msg in broadcasts:
                w.send(msg)
                stats.count(msg)

        for point_index, point_step in enumerate(points):
            for w in workers:
                msg = w.recv(timeout_s)
                if not isinstance(msg, AggregateReport):
                    raise RuntimeError(
                        f"expected report from feeder {w.feeder_id}, got {msg!r}"
                    )
                if msg.feeder_id != w.feeder_id:
                    raise RuntimeError(
                        f"feeder {w.feeder_id} channel carried a report "
                        f"for feeder {msg.feeder_id}"
                    )
                stats.count(msg)
                segments[msg.feeder_id].append((msg.step_start, msg.values))
            release = Release(point_index)
            for w in workers:
                w.send(release)

        for w in workers:
            msg = w.recv(timeout_s)
            if not isinstance(msg, RunComplete) or msg.feeder_id != w.feeder_id:
                raise RuntimeError(
                    f"expected RunComplete from feeder {w.feeder_id}, got {msg!r}"
                )
            stats.count(msg)
    except BaseException:
        for w in workers:
            w.shutdown()
        raise
    finally:
        join_error: BaseException | None = None
        for w in workers:
            try:
                w.join(timeout_s)
            except RuntimeError as exc:
                join_error = join_error or exc
    if join_error is not None:
        raise join_error

    per_feeder = []
    for fid in ids:
        values: list[float] = []
        expected_start = 0
        for start, seg in sorted(segments[fid]):
            if start != expected_start:
                raise RuntimeError(
                    f"feeder {fid}: report gap at step {expected_start}"
                )
            values.extend(seg)
            expected_start = start + len(seg)
        if expected_start != n_steps:
            raise RuntimeError(
                f"feeder {fid}: reports cover {expected_start} of {n_steps} steps"
            )
        per_feeder.append(
            FeederRun(fid, LoadSeries("feeder_head", fid, tuple(values)))
        )

    global_values = []
    for t in range(n_steps):
        total = 0.0
        for run in per_feeder:  # ascending feeder_id, fixed order
            total += run.head.values[t]
        global_values.append(total)

    traces = {
        w.feeder_id: w.trace for w in workers if w.trace is not None
    }
    return CoordinatorResult(
        global_head=LoadSeries("global", -1, tuple(global_values)),
        per_feeder=per_feeder,
        message_stats=stats,
        worker_traces=traces,
    )


def count_messages(result: CoordinatorResult) -> MessageStats:
    """Message accounting for a completed run."""
    return result.message_stats
