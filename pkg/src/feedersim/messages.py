"""Coordinator/worker message contract and its binary wire encoding.

Domain messages (the ones the communication bound counts):

    PriceBroadcast   coordinator -> worker, one per price change
    AggregateReport  worker -> coordinator, one per collection point
    RunComplete      worker -> coordinator, once per run
    Shutdown         coordinator -> worker, abort only (never sent on
                     the normal path, so the bound stays exact)

``Release`` is transport-level flow control: it ends a worker's wait at
a collection point and is excluded from message accounting, the same
way protocol ACKs are not application traffic.

Wire format (the process transport): length-prefixed binary records,
little-endian throughout.  Each frame is

    u32 body_length | body

and each body is a u8 variant tag followed by the variant's fields in
declaration order (u32 for indexes/ids/counts, f64 for physical
quantities).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass


@dataclass(frozen=True, slots=True)
class PriceBroadcast:
    """New market price, effective from ``step_index`` on."""

    step_index: int
    price: float


@dataclass(frozen=True, slots=True)
class AggregateReport:
    """Feeder-head powers for steps [step_start, step_start + len(values))."""

    feeder_id: int
    step_start: int
    values: tuple[float, ...]


@dataclass(frozen=True, slots=True)
class RunComplete:
    feeder_id: int


@dataclass(frozen=True, slots=True)
class Shutdown:
    pass


@dataclass(frozen=True, slots=True)
class Release:
    """Flow control: the coordinator has absorbed every report for
    collection point ``point_index``; workers may continue."""

    point_index: int


Message = PriceBroadcast | AggregateReport | RunComplete | Shutdown | Release

_TAG_RELEASE = 0
_TAG_PRICE = 1
_TAG_REPORT = 2
_TAG_COMPLETE = 3
_TAG_SHUTDOWN = 4

_U32 = struct.Struct("<I")
_PRICE_BODY = struct.Struct("<BId")
_REPORT_HEAD = struct.Struct("<BIII")
_ID_BODY = struct.Struct("<BI")


def encode(msg: Message) -> bytes:
    """Serialize one message to a length-prefixed frame."""
    if isinstance(msg, PriceBroadcast):
        body = _PRICE_BODY.pack(_TAG_PRICE, msg.step_index, msg.price)
    elif isinstance(msg, AggregateReport):
        body = _REPORT_HEAD.pack(
            _TAG_REPORT, msg.feeder_id, msg.step_start, len(msg.values)
        ) + struct.pack(f"<{len(msg.values)}d", *msg.values)
    elif isinstance(msg, RunComplete):
        body = _ID_BODY.pack(_TAG_COMPLETE, msg.feeder_id)
    elif isinstance(msg, Shutdown):
        body = bytes([_TAG_SHUTDOWN])
    elif isinstance(msg, Release):
        body = _ID_BODY.pack(_TAG_RELEASE, msg.point_index)
    else:
        raise TypeError(f"not a wire message: {msg!r}")
    return _U32.pack(len(body)) + body


def decode_body(body: bytes) -> Message:
    """Decode one frame body (the bytes after the length prefix)."""
    if not body:
        raise ValueError("empty message body")
    tag = body[0]
    if tag == _TAG_PRICE:
        _, step_index, price = _PRICE_BODY.unpack(body)
        return PriceBroadcast(step_index, price)
    if tag == _TAG_REPORT:
        _, feeder_id, step_start, n = _REPORT_HEAD.unpack_from(body)
        values = struct.unpack_from(f"<{n}d", body, _REPORT_HEAD.size)
        if len(body) != _REPORT_HEAD.size + 8 * n:
            raise ValueError("report frame length mismatch")
        return AggregateReport(feeder_id, step_start, values)
    if tag == _TAG_COMPLETE:
        _, feeder_id = _ID_BODY.unpack(body)
        return RunComplete(feeder_id)
    if tag == _TAG_SHUTDOWN:
        if len(body) != 1:
            raise ValueError("shutdown frame carries no fields")
        return Shutdown()
    if tag == _TAG_RELEASE:
        _, point_index = _ID_BODY.unpack(body)
        return Release(point_index)
    raise ValueError(f"unknown message tag {tag}")


def frame_length(prefix: bytes) -> int:
    """Body length from a 4-byte frame prefix."""
    return _U32.unpack(prefix)[0]


PREFIX_SIZE = _U32.size


@dataclass(slots=True)
class MessageStats:
    """Counts of domain messages observed in one run."""

    price_broadcasts: int = 0
    aggregate_reports: int = 0
    run_completes: int = 0
    shutdowns: int = 0

    @property
    def total(self) -> int:
        return (
            self.price_broadcasts
            + self.aggregate_reports
            + self.run_completes
            + self.shutdowns
        )

    def count(self, msg: Message) -> None:
        if isinstance(msg, PriceBroadcast):
            self.price_broadcasts += 1
        elif isinstance(msg, AggregateReport):
            self.aggregate_reports += 1
        elif isinstance(msg, RunComplete):
            self.run_completes += 1
        elif isinstance(msg, Shutdown):
            self.shutdowns += 1
        # Release frames are flow control, deliberately uncounted.


def expected_total(n_workers: int, n_collection_points: int, n_price_changes: int) -> int:
    """The communication bound: K * (1 + |points| + #changes)."""
    return n_workers * (1 + n_collection_points + n_price_changes)
