"""Frame ingestion, session segmentation and the per-sensor TSV store.

Store layout::

    <root>/manifest.tsv
    <root>/<subject>/<subject>_<hand>_s<session_id>_S<sensor_id>.tsv

Sensor files hold ``timestamp_ms<TAB>glove<TAB>sensor_id<TAB>value_mV`` lines
under a header.  The manifest lists one session per line.
"""
from __future__ import annotations

import enum
import logging
import socket
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING, BinaryIO, Iterable, Iterator, Union

import numpy as np

from .layout import SENSOR_IDS, HandRole, parse_glove, role_for
from .protocol import (FrameKind, Glove, SensorFrame, DecodeError, StreamDecoder)

if TYPE_CHECKING:
    from .benchmark import PrecisionEvent
    from .glove_sim import SessionRecording

log = logging.getLogger(__name__)

WARN_MV = 3700
CLEAR_MV = 3750
SENSOR_HEADER = "timestamp_ms\tglove\tsensor_id\tvalue_mV"
MANIFEST_HEADER = "subject\thand\tsession_id\tstart_ms\tstop_ms\tsample_count\tglove"
CHUNK = 64 * 1024

Source = Union[bytes, bytearray, BinaryIO, Iterable[bytes]]


class StoreError(OSError):
    """Persisting a session failed; ``report`` holds what was ingested so far."""

    report: "IngestReport | None" = None


@dataclass
class SensorSeries:
    timestamps_ms: np.ndarray
    values_mV: np.ndarray

    def __len__(self):
        return len(self.timestamps_ms)

    @classmethod
    def empty(cls) -> "SensorSeries":
        return cls(np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64))

    def __eq__(self, other):
        return (isinstance(other, SensorSeries)
                and np.array_equal(self.timestamps_ms, other.timestamps_ms)
                and np.array_equal(self.values_mV, other.values_mV))


@dataclass
class SessionLog:
    session_id: int
    subject: str
    hand: HandRole
    glove: Glove
    start_ms: int
    stop_ms: int
    samples: dict[int, SensorSeries] = field(default_factory=dict)
    events: list["PrecisionEvent"] = field(default_factory=list)

    def __post_init__(self):
        if not self.start_ms < self.stop_ms:
            raise ValueError(f"session needs start_ms < stop_ms, got {self.start_ms}, {self.stop_ms}")
        for sid in SENSOR_IDS:
            self.samples.setdefault(sid, SensorSeries.empty())

    @property
    def sample_count(self) -> int:
        return sum(len(s) for s in self.samples.values())

    @property
    def duration_s(self) -> float:
        return (self.stop_ms - self.start_ms) / 1000

    @property
    def key(self) -> tuple[str, HandRole, int]:
        return self.subject, self.hand, self.session_id

    def values(self, sensor_id: int) -> np.ndarray:
        return self.samples[sensor_id].values_mV

    def check(self) -> None:
        """Raise if samples fall outside the session or are out of order."""
        for sid, series in self.samples.items():
            ts = series.timestamps_ms
            if len(ts) and (ts[0] < self.start_ms or ts[-1] > self.stop_ms):
                raise ValueError(f"S{sid}: samples outside [{self.start_ms}, {self.stop_ms}]")
            if np.any(np.diff(ts) <= 0):
                raise ValueError(f"S{sid}: timestamps not strictly increasing")


def log_from_recording(rec: "SessionRecording", subject: str, session_id: int = 0) -> SessionLog:
    """The log that ingesting ``rec``'s frames would produce, built directly."""
    samples = {sid: SensorSeries(rec.tick_ms.copy(), rec.values_mV[:, sid - 1].copy())
               for sid in SENSOR_IDS}
    return SessionLog(session_id, subject, rec.hand, rec.glove, rec.start_ms, rec.stop_ms, samples)


# --- battery watchdog -------------------------------------------------------

class Transition(enum.Enum):
    WARN = "warn"
    CLEAR = "clear"


@dataclass(frozen=True)
class BatteryTransition:
    glove: Glove
    kind: Transition
    timestamp_ms: int
    value_mV: int


@dataclass
class BatteryStatus:
    glove: Glove
    last_mV: int | None = None
    warning_active: bool = False

    @property
    def below_threshold(self) -> bool:
        return self.last_mV is not None and self.last_mV < WARN_MV


class BatteryWatchdog:
    """Warn below 3700 mV, clear again only at or above 3750 mV."""

    def __init__(self):
        self.status: dict[Glove, BatteryStatus] = {}

    def update(self, frame: SensorFrame) -> BatteryTransition | None:
        if frame.kind is not FrameKind.BATTERY:
            return None
        st = self.status.setdefault(frame.glove, BatteryStatus(frame.glove))
        st.last_mV = frame.value_mV
        if not st.warning_active and frame.value_mV < WARN_MV:
            st.warning_active = True
            log.warning("%s glove battery low: %d mV", frame.glove.name.lower(), frame.value_mV)
            return BatteryTransition(frame.glove, Transition.WARN, frame.timestamp_ms, frame.value_mV)
        if st.warning_active and frame.value_mV >= CLEAR_MV:
            st.warning_active = False
            return BatteryTransition(frame.glove, Transition.CLEAR, frame.timestamp_ms, frame.value_mV)
        return None


def battery_watchdog(frames: Iterable[SensorFrame]) -> list[BatteryTransition]:
    dog = BatteryWatchdog()
    return [t for t in map(dog.update, frames) if t is not None]


# --- sensor files and the store --------------------------------------------

def sensor_file_name(subject: str, hand: HandRole, session_id: int, sensor_id: int) -> str:
    return f"{subject}_{hand.value}_s{session_id}_S{sensor_id}.tsv"


def _fmt(v) -> str:
    return str(int(v)) if float(v).is_integer() else repr(float(v))


def write_sensor_files(session: SessionLog, directory: str | Path) -> list[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    glove = session.glove.name.lower()
    paths = []
    for sid in sorted(session.samples):
        series = session.samples[sid]
        order = np.argsort(series.timestamps_ms, kind="stable")
        lines = [SENSOR_HEADER]
        lines += [f"{int(t)}\t{glove}\t{sid}\t{_fmt(v)}"
                  for t, v in zip(series.timestamps_ms[order].tolist(), series.values_mV[order].tolist())]
        path = directory / sensor_file_name(session.subject, session.hand, session.session_id, sid)
        path.write_text("\n".join(lines) + "\n")
        paths.append(path)
    return paths


def read_sensor_file(path: str | Path) -> tuple[Glove | None, SensorSeries]:
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0] != SENSOR_HEADER:
        raise ValueError(f"{path}: missing sensor file header")
    rows = [line.split("\t") for line in lines[1:] if line]
    if not rows:
        return None, SensorSeries.empty()
    glove = parse_glove(rows[0][1])
    ts = np.array([int(r[0]) for r in rows], dtype=np.int64)
    raw = [r[3] for r in rows]
    if all(v.lstrip("-").isdigit() for v in raw):
        vals = np.array([int(v) for v in raw], dtype=np.int64)
    else:
        vals = np.array([float(v) for v in raw])
    return glove, SensorSeries(ts, vals)


class SessionStore:
    """Sessions keyed by (subject, hand, session_id), optionally mirrored to disk.

    Writes are serialized by an internal lock so several ingest workers may
    share one store.
    """

    def __init__(self, root: str | Path | None = None):
        self.root = Path(root) if root is not None else None
        self._sessions: dict[tuple[str, HandRole, int], SessionLog] = {}
        self._lock = threading.Lock()
        if self.root is not None:
            try:
                self.root.mkdir(parents=True, exist_ok=True)
            except OSError as exc:
                raise StoreError(f"cannot create store at {self.root}: {exc}") from exc

    def __len__(self):
        return len(self._sessions)

    def find_replay(self, session: SessionLog) -> SessionLog | None:
        """An already stored session with the same origin, span and sample count."""
        for s in self._sessions.values():
            if ((s.subject, s.hand, s.glove, s.start_ms, s.stop_ms, s.sample_count)
                    == (session.subject, session.hand, session.glove, session.start_ms,
                        session.stop_ms, session.sample_count)):
                return s
        return None

    def add(self, session: SessionLog, assign_id: bool = True, dedupe: bool = False) -> SessionLog:
        """Insert ``session``, giving it the next id for its subject and hand.

        With ``dedupe`` a replayed session is not stored twice; the existing
        one is returned instead.
        """
        with self._lock:
            if dedupe:
                existing = self.find_replay(session)
                if existing is not None:
                    return existing
            if assign_id:
                session.session_id = 1 + max(
                    (k[2] for k in self._sessions if k[:2] == (session.subject, session.hand)),
                    default=0)
            if session.key in self._sessions:
                raise StoreError(f"duplicate session {session.key}")
            if self.root is not None:
                try:
                    write_sensor_files(session, self.root / session.subject)
                    self._sessions[session.key] = session
                    self._write_manifest()
                except OSError as exc:
                    self._sessions.pop(session.key, None)
                    raise StoreError(f"writing session {session.key}: {exc}") from exc
            else:
                self._sessions[session.key] = session
        return session

    def sessions(self, subject: str | None = None, hand: HandRole | None = None) -> list[SessionLog]:
        keys = sorted(self._sessions, key=lambda k: (k[0], k[1].value, k[2]))
        return [self._sessions[k] for k in keys
                if (subject is None or k[0] == subject) and (hand is None or k[1] is hand)]

    def subjects(self) -> list[str]:
        return sorted({k[0] for k in self._sessions})

    def get(self, subject: str, hand: HandRole, session_id: int) -> SessionLog:
        return self._sessions[(subject, hand, session_id)]

    def manifest_rows(self) -> list[tuple]:
        return [(s.subject, s.hand.value, s.session_id, s.start_ms, s.stop_ms, s.sample_count,
                 s.glove.name.lower()) for s in self.sessions()]

    def _write_manifest(self) -> None:
        lines = [MANIFEST_HEADER] + ["\t".join(map(str, r)) for r in self.manifest_rows()]
        (self.root / "manifest.tsv").write_text("\n".join(lines) + "\n")

    def flush(self) -> None:
        if self.root is not None:
            with self._lock:
                self._write_manifest()

    @classmethod
    def open(cls, root: str | Path) -> "SessionStore":
        """Load a store previously written to ``root``."""
        root = Path(root)
        manifest = root / "manifest.tsv"
        if not manifest.is_file():
            raise StoreError(f"no manifest.tsv in {root}")
        store = cls.__new__(cls)
        store.root, store._sessions, store._lock = root, {}, threading.Lock()
        lines = manifest.read_text().splitlines()
        if not lines or lines[0] != MANIFEST_HEADER:
            raise StoreError(f"{manifest}: bad header")
        for line in lines[1:]:
            if not line.strip():
                continue
            subject, hand, sid, start, stop, count, glove = line.split("\t")
            role = HandRole.parse(hand)
            samples = {}
            for sensor in SENSOR_IDS:
                path = root / subject / sensor_file_name(subject, role, int(sid), sensor)
                samples[sensor] = read_sensor_file(path)[1] if path.exists() else SensorSeries.empty()
            session = SessionLog(int(sid), subject, role, parse_glove(glove), int(start), int(stop),
                                 samples)
            if session.sample_count != int(count):
                raise StoreError(f"{subject} {hand} s{sid}: manifest says {count} samples, "
                                 f"files hold {session.sample_count}")
            store._sessions[session.key] = session
        return store


# --- ingestion --------------------------------------------------------------

@dataclass
class IngestReport:
    sessions: list[tuple[str, HandRole, int]] = field(default_factory=list)
    frames_decoded: int = 0
    readings_decoded: int = 0
    samples_persisted: int = 0
    orphans: int = 0
    battery_frames: int = 0
    decode_errors: list[DecodeError] = field(default_factory=list)
    transitions: list[BatteryTransition] = field(default_factory=list)
    unmatched_stops: int = 0
    unterminated: int = 0
    discarded_sessions: int = 0
    duplicates: int = 0

    def summary(self) -> str:
        return (f"sessions={len(self.sessions)}\tframes={self.frames_decoded}"
                f"\treadings={self.readings_decoded}\tpersisted={self.samples_persisted}"
                f"\torphans={self.orphans}\tdecode_errors={len(self.decode_errors)}"
                f"\tduplicates={self.duplicates}"
                f"\tbattery_warnings={sum(t.kind is Transition.WARN for t in self.transitions)}")


class _OpenSession:
    def __init__(self, start_ms: int):
        self.start_ms = start_ms
        self.ts: dict[int, list[int]] = {sid: [] for sid in SENSOR_IDS}
        self.vals: dict[int, list[int]] = {sid: [] for sid in SENSOR_IDS}

    def count(self) -> int:
        return sum(map(len, self.ts.values()))


class Segmenter:
    """Splits one or two gloves' frames into sessions using the start/stop marks."""

    def __init__(self, store: SessionStore, subject: str, dominant_glove: Glove):
        self.store = store
        self.subject = subject
        self.dominant_glove = dominant_glove
        self.report = IngestReport()
        self.watchdog = BatteryWatchdog()
        self._open: dict[Glove, _OpenSession] = {}

    def feed(self, frame: SensorFrame) -> None:
        rep = self.report
        rep.frames_decoded += 1
        kind = frame.kind
        if kind is FrameKind.READING:
            rep.readings_decoded += 1
            sess = self._open.get(frame.glove)
            if sess is None or frame.timestamp_ms < sess.start_ms:
                rep.orphans += 1
                return
            ts = sess.ts[frame.sensor_id]
            if ts and frame.timestamp_ms <= ts[-1]:
                rep.orphans += 1
                return
            ts.append(frame.timestamp_ms)
            sess.vals[frame.sensor_id].append(frame.value_mV)
        elif kind is FrameKind.BATTERY:
            rep.battery_frames += 1
            t = self.watchdog.update(frame)
            if t is not None:
                rep.transitions.append(t)
        elif frame.is_start:
            if frame.glove in self._open:
                self._close(frame.glove, frame.timestamp_ms)
            self._open[frame.glove] = _OpenSession(frame.timestamp_ms)
        elif frame.glove in self._open:
            self._close(frame.glove, frame.timestamp_ms)
        else:
            rep.unmatched_stops += 1

    def _close(self, glove: Glove, stop_ms: int) -> None:
        sess = self._open.pop(glove)
        rep = self.report
        if stop_ms <= sess.start_ms:
            rep.orphans += sess.count()
            rep.discarded_sessions += 1
            return
        samples = {}
        for sid in SENSOR_IDS:
            ts = np.array(sess.ts[sid], dtype=np.int64)
            vals = np.array(sess.vals[sid], dtype=np.int64)
            keep = ts <= stop_ms
            rep.orphans += int(np.count_nonzero(~keep))
            samples[sid] = SensorSeries(ts[keep], vals[keep])
        session = SessionLog(0, self.subject, role_for(glove, self.dominant_glove), glove,
                             sess.start_ms, stop_ms, samples)
        try:
            stored = self.store.add(session, dedupe=True)
        except StoreError as exc:
            exc.report = rep
            raise
        if stored is not session:
            rep.duplicates += 1
        rep.sessions.append(stored.key)
        rep.samples_persisted += stored.sample_count

    def finish(self) -> IngestReport:
        """Discard sessions still open at end of stream, orphaning their samples."""
        for glove in list(self._open):
            sess = self._open.pop(glove)
            self.report.orphans += sess.count()
            self.report.unterminated += 1
        return self.report


def _chunks(source: Source) -> Iterator[bytes]:
    if isinstance(source, (bytes, bytearray, memoryview)):
        yield bytes(source)
    elif hasattr(source, "read"):
        while True:
            chunk = source.read(CHUNK)
            if not chunk:
                break
            yield chunk
    else:
        yield from source


def ingest_stream(source: Source, store: SessionStore, subject: str,
                  dominant_glove: Glove = Glove.LEFT) -> IngestReport:
    """Decode ``source`` and file every complete session into ``store``.

    Decode errors are recorded in the report and never stop ingestion.  A
    `StoreError` stops it; the exception carries the partial report.
    """
    seg = Segmenter(store, subject, dominant_glove)
    decoder = StreamDecoder()
    for chunk in _chunks(source):
        frames, errors = decoder.feed(chunk)
        seg.report.decode_errors.extend(errors)
        for frame in frames:
            seg.feed(frame)
    seg.report.decode_errors.extend(decoder.finish())
    return seg.finish()


def ingest_file(path: str | Path, store: SessionStore, subject: str,
                dominant_glove: Glove = Glove.LEFT) -> IngestReport:
    try:
        fh = open(path, "rb")
    except OSError as exc:
        raise StoreError(f"cannot read {path}: {exc}") from exc
    with fh:
        return ingest_stream(fh, store, subject, dominant_glove)


def ingest_concurrently(sources: list[Source], store: SessionStore, subject: str,
                        dominant_glove: Glove = Glove.LEFT) -> list[IngestReport]:
    """One worker thread per source, all filing into ``store``."""
    reports: list[IngestReport | None] = [None] * len(sources)
    failures: list[BaseException] = []

    def work(i, src):
        try:
            reports[i] = ingest_stream(src, store, subject, dominant_glove)
        except BaseException as exc:  # re-raised in the caller's thread
            failures.append(exc)

    threads = [threading.Thread(target=work, args=(i, s)) for i, s in enumerate(sources)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    if failures:
        raise failures[0]
    return reports  # type: ignore[return-value]


def _socket_chunks(conn: socket.socket) -> Iterator[bytes]:
    while True:
        chunk = conn.recv(CHUNK)
        if not chunk:
            return
        yield chunk


def serve(store: SessionStore, subject: str, dominant_glove: Glove, *, host: str = "127.0.0.1",
          port: int = 0, connections: int = 1, ready: threading.Event | None = None,
          bound: list | None = None, timeout: float | None = None) -> list[IngestReport]:
    """Listen for ``connections`` glove streams and ingest each on its own thread.

    The bound (host, port) is appended to ``bound`` and ``ready`` is set once
    the socket is listening, so callers may pass ``port=0``.
    """
    with socket.create_server((host, port)) as srv:
        srv.settimeout(timeout)
        if bound is not None:
            bound.append(srv.getsockname()[:2])
        if ready is not None:
            ready.set()
        conns = []
        for _ in range(connections):
            conn, _addr = srv.accept()
            conn.settimeout(timeout)
            conns.append(conn)
        try:
            return ingest_concurrently([_socket_chunks(c) for c in conns], store, subject,
                                       dominant_glove)
        finally:
            for c in conns:
                c.close()
