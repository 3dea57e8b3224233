"""Telemetry frame encoding and resynchronizing stream decoding.

Each frame on the wire is 11 bytes::

    A5 | glove | kind | sensor_id | timestamp_ms (u32 LE) | value_mV (u16 LE) | xor

where ``xor`` is the XOR of the ten preceding bytes.  A receiver that loses
alignment scans forward to the next ``0xA5`` byte and tries again.
"""
from __future__ import annotations

import enum
import operator
import struct
from dataclasses import dataclass
from functools import reduce
from typing import Iterable

MAGIC = 0xA5
BODY_SIZE = 10
FRAME_SIZE = 11
N_SENSORS = 12
SENSOR_RAIL_MV = 3300
BATTERY_MAX_MV = 4200
MARK_START = 1
MARK_STOP = 0

_BODY = struct.Struct("<BBBBIH")


class InvalidFrame(ValueError):
    """A frame violates the field constraints and cannot be encoded."""


class Glove(enum.IntEnum):
    LEFT = 0
    RIGHT = 1


class FrameKind(enum.IntEnum):
    READING = 0
    BATTERY = 1
    MARK = 2


@dataclass(frozen=True)
class SensorFrame:
    glove: Glove
    kind: FrameKind
    timestamp_ms: int
    value_mV: int
    sensor_id: int = 0

    def __post_init__(self):
        # normalize plain ints so that decoded and hand-built frames compare equal
        object.__setattr__(self, "glove", Glove(self.glove))
        object.__setattr__(self, "kind", FrameKind(self.kind))
        if self.kind is not FrameKind.READING:
            object.__setattr__(self, "sensor_id", 0)

    @classmethod
    def reading(cls, glove, sensor_id: int, timestamp_ms: int, value_mV: int) -> "SensorFrame":
        return cls(glove, FrameKind.READING, timestamp_ms, value_mV, sensor_id)

    @classmethod
    def battery(cls, glove, timestamp_ms: int, value_mV: int) -> "SensorFrame":
        return cls(glove, FrameKind.BATTERY, timestamp_ms, value_mV)

    @classmethod
    def mark(cls, glove, timestamp_ms: int, start: bool) -> "SensorFrame":
        return cls(glove, FrameKind.MARK, timestamp_ms, MARK_START if start else MARK_STOP)

    @property
    def is_start(self) -> bool:
        return self.kind is FrameKind.MARK and self.value_mV == MARK_START


@dataclass(frozen=True)
class DecodeError:
    """A contiguous run of bytes that could not be decoded."""

    offset: int
    length: int
    reason: str


def validate_frame(frame: SensorFrame) -> None:
    """Raise `InvalidFrame` unless every field is within its allowed range."""
    if not 0 <= frame.timestamp_ms <= 0xFFFFFFFF:
        raise InvalidFrame(f"timestamp out of u32 range: {frame.timestamp_ms}")
    if frame.value_mV < 0:
        raise InvalidFrame(f"negative value: {frame.value_mV}")
    if frame.kind is FrameKind.READING:
        if not 1 <= frame.sensor_id <= N_SENSORS:
            raise InvalidFrame(f"sensor_id must be in 1..{N_SENSORS}, got {frame.sensor_id}")
        if frame.value_mV > SENSOR_RAIL_MV:
            raise InvalidFrame(f"sensor value {frame.value_mV} mV exceeds the {SENSOR_RAIL_MV} mV rail")
    elif frame.kind is FrameKind.BATTERY:
        if frame.value_mV > BATTERY_MAX_MV:
            raise InvalidFrame(f"battery value {frame.value_mV} mV exceeds {BATTERY_MAX_MV} mV")
    elif frame.value_mV not in (MARK_START, MARK_STOP):
        raise InvalidFrame(f"mark code must be 0 or 1, got {frame.value_mV}")


def checksum(body: bytes) -> int:
    return reduce(operator.xor, body, 0)


def encode_frame(frame: SensorFrame) -> bytes:
    validate_frame(frame)
    body = _BODY.pack(MAGIC, frame.glove, frame.kind, frame.sensor_id,
                      frame.timestamp_ms, frame.value_mV)
    return body + bytes((checksum(body),))


def encode_frames(frames: Iterable[SensorFrame]) -> bytes:
    return b"".join(encode_frame(f) for f in frames)


def _parse(raw: bytes | bytearray | memoryview) -> SensorFrame | str:
    """Return the frame in an 11-byte window, or a reason string on failure."""
    body = bytes(raw[:BODY_SIZE])
    if checksum(body) != raw[BODY_SIZE]:
        return "checksum mismatch"
    _, glove, kind, sensor_id, ts, value = _BODY.unpack(body)
    if glove > Glove.RIGHT:
        return f"unknown glove {glove}"
    if kind > FrameKind.MARK:
        return f"unknown kind {kind}"
    if kind != FrameKind.READING and sensor_id != 0:
        return "sensor_id set on non-reading frame"
    frame = SensorFrame(Glove(glove), FrameKind(kind), ts, value, sensor_id)
    try:
        validate_frame(frame)
    except InvalidFrame as exc:
        return str(exc)
    return frame


class StreamDecoder:
    """Incremental decoder; chunk boundaries never change the result.

    Bytes skipped while hunting for the next valid frame are coalesced into a
    single `DecodeError` per contiguous region.
    """

    def __init__(self):
        self._buf = bytearray()
        self._base = 0  # stream offset of self._buf[0]
        self._bad_start: int | None = None
        self._bad_reason = ""

    def _mark_bad(self, offset: int, reason: str) -> None:
        if self._bad_start is None:
            self._bad_start = offset
            self._bad_reason = reason

    def _flush_bad(self, end: int, errors: list[DecodeError]) -> None:
        if self._bad_start is not None:
            errors.append(DecodeError(self._bad_start, end - self._bad_start, self._bad_reason))
            self._bad_start = None

    def feed(self, data: bytes) -> tuple[list[SensorFrame], list[DecodeError]]:
        frames: list[SensorFrame] = []
        errors: list[DecodeError] = []
        buf = self._buf
        buf.extend(data)
        i, n = 0, len(buf)
        while i < n:
            if buf[i] != MAGIC:
                self._mark_bad(self._base + i, "bad magic byte")
                j = buf.find(MAGIC, i)
                i = n if j < 0 else j
                continue
            if n - i < FRAME_SIZE:
                break
            result = _parse(memoryview(buf)[i:i + FRAME_SIZE])
            if isinstance(result, str):
                self._mark_bad(self._base + i, result)
                j = buf.find(MAGIC, i + 1)
                i = n if j < 0 else j
                continue
            self._flush_bad(self._base + i, errors)
            frames.append(result)
            i += FRAME_SIZE
        del buf[:i]
        self._base += i
        return frames, errors

    def finish(self) -> list[DecodeError]:
        """Report any trailing partial frame; the decoder is reset afterwards."""
        errors: list[DecodeError] = []
        if self._buf:
            self._mark_bad(self._base, "truncated frame")
        self._flush_bad(self._base + len(self._buf), errors)
        self._base += len(self._buf)
        self._buf.clear()
        return errors


def decode_stream(data: bytes) -> tuple[list[SensorFrame], list[DecodeError]]:
    decoder = StreamDecoder()
    frames, errors = decoder.feed(data)
    errors.extend(decoder.finish())
    return frames, errors


def to_hex(data: bytes) -> str:
    """Debug form used in fixtures: ``A5 00 00 05 ...``."""
    return " ".join(f"{b:02X}" for b in data)


def from_hex(text: str) -> bytes:
    """Inverse of `to_hex`; whitespace and ``#`` comments are ignored."""
    lines = (line.split("#", 1)[0] for line in text.splitlines())
    return bytes.fromhex(" ".join(lines))
