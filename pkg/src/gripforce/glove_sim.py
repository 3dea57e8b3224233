"""Deterministic virtual sensor glove.

A `GloveSimulator` owns one device clock, one battery and one RNG stream.
Sessions are generated tick by tick at the configured sample period; every
tick carries one reading per sensor drawn from a normal distribution clipped
to the supply rail.  By default the latent normal is chosen so that the
clipped readings reproduce the archetype's mean and SD; see `latent_normal`.
Frames are pushed to a sink, which is any callable accepting a `SensorFrame`.
"""
from __future__ import annotations

import math
import socket
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import BinaryIO, Callable, Iterator

import numpy as np

from .layout import SENSOR_IDS, HandRole, glove_for, parse_glove
from .protocol import (FRAME_SIZE, N_SENSORS, SENSOR_RAIL_MV, Glove, SensorFrame,
                       encode_frame)

Sink = Callable[[SensorFrame], object]


class SinkError(RuntimeError):
    """The frame consumer raised while receiving a frame."""


def _cdf(z: float) -> float:
    return 0.5 * math.erfc(-z / math.sqrt(2))


def _pdf(z: float) -> float:
    return math.exp(-0.5 * z * z) / math.sqrt(2 * math.pi)


def censored_moments(mu: float, sigma: float, lo: float = 0.0,
                     hi: float = SENSOR_RAIL_MV) -> tuple[float, float]:
    """Mean and SD of ``clip(Y, lo, hi)`` for ``Y ~ N(mu, sigma)``."""
    if sigma == 0:
        v = min(max(mu, lo), hi)
        return v, 0.0
    a, b = (lo - mu) / sigma, (hi - mu) / sigma
    pa, pb, da, db = _cdf(a), _cdf(b), _pdf(a), _pdf(b)
    inner = pb - pa
    # mass beyond an infinite bound is zero; skip its inf * 0 terms
    top, top2, edge_b = (hi * (1 - pb), hi * hi * (1 - pb), b * db) if math.isfinite(hi) else (0.0, 0.0, 0.0)
    bot, bot2, edge_a = (lo * pa, lo * lo * pa, a * da) if math.isfinite(lo) else (0.0, 0.0, 0.0)
    m1 = bot + top + mu * inner + sigma * (da - db)
    m2 = (bot2 + top2 + (mu * mu + sigma * sigma) * inner
          + 2 * mu * sigma * (da - db) + sigma * sigma * (edge_a - edge_b))
    return m1, math.sqrt(max(m2 - m1 * m1, 0.0))


def _lower_only(mean: float, sd: float) -> tuple[float, float]:
    # clip at 0 only: mean/sd of max(0, z + Z) grows monotonically with z
    def ratio(z):
        m, s = censored_moments(z, 1.0, 0.0, math.inf)
        return m / s

    target = mean / sd
    lo, hi = -8.0, max(8.0, 2 * target)
    if target <= ratio(lo):
        z = lo
    else:
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            lo, hi = (mid, hi) if ratio(mid) < target else (lo, mid)
        z = 0.5 * (lo + hi)
    sigma = mean / censored_moments(z, 1.0, 0.0, math.inf)[0]
    return z * sigma, sigma


def latent_normal(mean: float, sd: float, lo: float = 0.0,
                  hi: float = SENSOR_RAIL_MV) -> tuple[float, float]:
    """(mu, sigma) of the normal whose clip to [lo, hi] has the given mean and SD.

    Plain clipping of N(mean, sd) inflates the mean and shrinks the SD of
    cells with a sizeable mass below zero.  Cells with zero mean or zero SD
    are returned unchanged, as are targets no clipped normal can reach.
    """
    if sd == 0 or mean <= lo or mean >= hi:
        return mean, sd
    mu, sigma = _lower_only(mean - lo, sd)
    mu += lo
    # Newton on (mu, log sigma) to take the upper rail into account
    x = np.array([mu, math.log(sigma)])
    target = np.array([mean, sd])
    for _ in range(50):
        f = np.array(censored_moments(x[0], math.exp(x[1]), lo, hi)) - target
        if np.all(np.abs(f) <= 1e-10 * sd):
            return float(x[0]), math.exp(x[1])
        jac = np.empty((2, 2))
        for k, h in enumerate((1e-6 * max(1.0, abs(x[0])), 1e-7)):
            step = x.copy()
            step[k] += h
            jac[:, k] = (np.array(censored_moments(step[0], math.exp(step[1]), lo, hi)) - target - f) / h
        try:
            x = x - np.linalg.solve(jac, f)
        except np.linalg.LinAlgError:
            break
    return mu, sigma


@dataclass
class SubjectArchetype:
    """Per-hand, per-sensor grip-force parameters of a simulated subject."""

    name: str
    dominant_glove: Glove
    mean_mV: dict[HandRole, tuple[float, ...]]
    sd_mV: dict[HandRole, tuple[float, ...]]
    task_time_mean_s: dict[HandRole, float]
    task_time_sd_s: dict[HandRole, float]
    session_count: dict[HandRole, int]

    def __post_init__(self):
        for role in HandRole:
            means, sds = self.mean_mV[role], self.sd_mV[role]
            if len(means) != N_SENSORS or len(sds) != N_SENSORS:
                raise ValueError(f"{self.name}: need {N_SENSORS} means and SDs per hand")
            if min(means) < 0 or min(sds) < 0:
                raise ValueError(f"{self.name}: means and SDs must be non-negative")
            if self.task_time_sd_s[role] < 0 or self.task_time_mean_s[role] <= 0:
                raise ValueError(f"{self.name}: invalid task-time distribution")

    def params(self, hand: HandRole, sensor_id: int) -> tuple[float, float]:
        return self.mean_mV[hand][sensor_id - 1], self.sd_mV[hand][sensor_id - 1]

    def glove(self, hand: HandRole) -> Glove:
        return glove_for(hand, self.dominant_glove)


def _archetype(name, glove, dom_mean, dom_sd, nd_mean, nd_sd, t_mean, t_sd, n_dom, n_nd):
    D, N = HandRole.DOMINANT, HandRole.NONDOMINANT
    # task times were only published for the dominant hand; reused for both
    return SubjectArchetype(
        name=name, dominant_glove=glove,
        mean_mV={D: dom_mean, N: nd_mean}, sd_mV={D: dom_sd, N: nd_sd},
        task_time_mean_s={D: t_mean, N: t_mean}, task_time_sd_s={D: t_sd, N: t_sd},
        session_count={D: n_dom, N: n_nd})


def builtin_archetypes() -> tuple[SubjectArchetype, SubjectArchetype]:
    """The expert and novice profiles, sensors S1..S12 in order."""
    expert = _archetype(
        "expert", Glove.LEFT,
        dom_mean=(0, 1.4, 4.5, 2, 99, 452, 587, 0, 0.5, 474, 0, 1.2),
        dom_sd=(0, 0.7, 1.6, 1.2, 89, 102, 53, 0, 7.7, 70, 0, 1.7),
        nd_mean=(1, 0, 0, 9, 364, 371, 71, 109, 90, 160, 825, 418),
        nd_sd=(1.5, 0, 0, 27, 107, 68, 37, 118, 170, 138, 450, 250),
        t_mean=8.882, t_sd=1.141, n_dom=10, n_nd=12)
    novice = _archetype(
        "novice", Glove.RIGHT,
        dom_mean=(0, 23, 674, 0.7, 754, 498, 85, 651, 1132, 617, 847, 858),
        dom_sd=(0, 150, 207, 5.5, 188, 74, 49, 192, 483, 312, 418, 280),
        nd_mean=(0, 69, 0, 0, 296, 1063, 526, 233, 0, 500, 0, 0.4),
        nd_sd=(0, 27, 0, 0, 148, 120, 64, 257, 2, 365, 0, 0.5),
        t_mean=15.424, t_sd=4.832, n_dom=11, n_nd=10)
    return expert, novice


def get_archetype(name: str) -> SubjectArchetype:
    """Look up a builtin archetype by name, or load one from a key=value file."""
    for arch in builtin_archetypes():
        if arch.name == name:
            return arch
    path = Path(name)
    if path.is_file():
        return load_archetype(path)
    raise KeyError(f"unknown archetype {name!r} (builtin: expert, novice)")


def dump_archetype(arch: SubjectArchetype) -> str:
    lines = [f"name={arch.name}", f"dominant_glove={arch.dominant_glove.name.lower()}"]
    for role in HandRole:
        r = role.value
        lines += [f"{r}.task_time_mean_s={arch.task_time_mean_s[role]!r}",
                  f"{r}.task_time_sd_s={arch.task_time_sd_s[role]!r}",
                  f"{r}.sessions={arch.session_count[role]}"]
        for sid in SENSOR_IDS:
            mean, sd = arch.params(role, sid)
            lines += [f"{r}.S{sid}.mean_mV={mean!r}", f"{r}.S{sid}.sd_mV={sd!r}"]
    return "\n".join(lines) + "\n"


def load_archetype(path: str | Path) -> SubjectArchetype:
    """Parse a key=value archetype file (the format written by `dump_archetype`).

    Sensor keys not present default to 0 mV mean and SD.
    """
    kv: dict[str, str] = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key=value")
        key, value = line.split("=", 1)
        kv[key.strip()] = value.strip()
    try:
        name = kv.pop("name")
        glove = parse_glove(kv.pop("dominant_glove"))
        out = dict(mean_mV={}, sd_mV={}, task_time_mean_s={}, task_time_sd_s={}, session_count={})
        for role in HandRole:
            r = role.value
            out["task_time_mean_s"][role] = float(kv.pop(f"{r}.task_time_mean_s"))
            out["task_time_sd_s"][role] = float(kv.pop(f"{r}.task_time_sd_s"))
            out["session_count"][role] = int(kv.pop(f"{r}.sessions", "10"))
            out["mean_mV"][role] = tuple(float(kv.pop(f"{r}.S{s}.mean_mV", "0")) for s in SENSOR_IDS)
            out["sd_mV"][role] = tuple(float(kv.pop(f"{r}.S{s}.sd_mV", "0")) for s in SENSOR_IDS)
    except KeyError as exc:
        raise ValueError(f"{path}: missing key {exc.args[0]}") from None
    if kv:
        raise ValueError(f"{path}: unknown keys {sorted(kv)}")
    return SubjectArchetype(name=name, dominant_glove=glove, **out)


@dataclass(frozen=True)
class SimulatorConfig:
    sample_period_ms: int = 20
    battery_start_mV: int = 4200
    battery_warn_mV: int = 3700
    battery_drain_mV_per_min: float = 5.0
    battery_period_ms: int = 1000
    rng_seed: int = 0
    throughput_cap_bps: int = 115_200
    inter_session_gap_ms: int = 2000
    min_duration_s: float = 1.0
    max_duration_s: float = 60.0
    realtime: bool = False
    match_moments: bool = True  # False: clip N(mean, sd) directly

    def __post_init__(self):
        if self.sample_period_ms <= 0:
            raise ValueError("sample_period_ms must be positive")
        if not self.battery_warn_mV < self.battery_start_mV:
            raise ValueError("battery_warn_mV must be below battery_start_mV")
        if self.battery_drain_mV_per_min < 0:
            raise ValueError("battery drain cannot be negative")
        if self.rng_seed < 0:
            raise ValueError("rng_seed must be unsigned")
        if self.battery_period_ms % self.sample_period_ms:
            raise ValueError("battery period must be a multiple of the sample period")


@dataclass
class SessionRecording:
    """Raw content of one simulated session before framing."""

    glove: Glove
    hand: HandRole
    start_ms: int
    stop_ms: int
    tick_ms: np.ndarray          # (ticks,) int64
    values_mV: np.ndarray        # (ticks, 12) int64, column k is sensor k+1
    battery: list[tuple[int, int]] = field(default_factory=list)  # (timestamp_ms, mV)

    @property
    def ticks(self) -> int:
        return len(self.tick_ms)

    def frames(self) -> Iterator[SensorFrame]:
        g = self.glove
        battery = dict(self.battery)
        yield SensorFrame.mark(g, self.start_ms, start=True)
        for ts, row in zip(self.tick_ms.tolist(), self.values_mV.tolist()):
            if ts in battery:
                yield SensorFrame.battery(g, ts, battery[ts])
            for sid, v in enumerate(row, 1):
                yield SensorFrame.reading(g, sid, ts, v)
        yield SensorFrame.mark(g, self.stop_ms, start=False)


@dataclass(frozen=True)
class SessionSummary:
    index: int
    subject: str
    glove: Glove
    hand: HandRole
    start_ms: int
    stop_ms: int
    ticks: int
    readings: int
    battery_frames: int
    frames: int
    bytes: int
    battery_end_mV: int

    @property
    def duration_s(self) -> float:
        return (self.stop_ms - self.start_ms) / 1000

    def line(self) -> str:
        return (f"session={self.index}\tsubject={self.subject}\thand={self.hand.value}"
                f"\tglove={self.glove.name.lower()}\tstart_ms={self.start_ms}\tstop_ms={self.stop_ms}"
                f"\tduration_s={self.duration_s:.3f}\tticks={self.ticks}\treadings={self.readings}"
                f"\tframes={self.frames}\tbattery_mV={self.battery_end_mV}")


class _Pacer:
    """Holds frames back to wall-clock tick times and the link byte rate."""

    def __init__(self, cap_bps: int, clock: Callable[[], float], sleep: Callable[[float], None]):
        self.cap_bps = cap_bps
        self.clock = clock
        self.sleep = sleep
        self.t0: float | None = None
        self.v0 = 0
        self.sent = 0

    def wait(self, virtual_ms: int, nbytes: int) -> None:
        if self.t0 is None:
            self.t0, self.v0 = self.clock(), virtual_ms
        due = max((virtual_ms - self.v0) / 1000, (self.sent + nbytes) * 8 / self.cap_bps)
        delay = self.t0 + due - self.clock()
        if delay > 0:
            self.sleep(delay)
        self.sent += nbytes


class GloveSimulator:
    """One virtual glove.  Not safe for concurrent use; make one per thread."""

    def __init__(self, archetype: SubjectArchetype, hand: HandRole,
                 config: SimulatorConfig = SimulatorConfig(), *,
                 clock: Callable[[], float] = time.monotonic,
                 sleep: Callable[[float], None] = time.sleep):
        self.archetype = archetype
        self.hand = hand
        self.config = config
        self.glove = archetype.glove(hand)
        self.rng = np.random.default_rng(config.rng_seed)
        self.now_ms = 0
        self.sessions_run = 0
        self._pacer = _Pacer(config.throughput_cap_bps, clock, sleep) if config.realtime else None
        cells = list(zip(archetype.mean_mV[hand], archetype.sd_mV[hand]))
        if config.match_moments:
            cells = [latent_normal(m, s) for m, s in cells]
        self._means = np.array([m for m, _ in cells], dtype=float)
        self._sds = np.array([s for _, s in cells], dtype=float)

    def battery_mV(self, at_ms: int | None = None) -> int:
        cfg = self.config
        t = self.now_ms if at_ms is None else at_ms
        level = cfg.battery_start_mV - cfg.battery_drain_mV_per_min * t / 60_000
        return max(0, int(np.floor(level + 1e-9)))

    def draw_duration_s(self) -> float:
        cfg = self.config
        t = self.rng.normal(self.archetype.task_time_mean_s[self.hand],
                            self.archetype.task_time_sd_s[self.hand])
        return float(np.clip(t, cfg.min_duration_s, cfg.max_duration_s))

    def generate_session(self, duration_s: float | None = None) -> SessionRecording:
        """Advance the device clock through one session and return its content."""
        cfg = self.config
        if duration_s is None:
            duration_s = self.draw_duration_s()
        if self.sessions_run:
            self.now_ms += cfg.inter_session_gap_ms
        period = cfg.sample_period_ms
        ticks = max(1, int(round(duration_s * 1000 / period)))
        start = self.now_ms
        tick_ms = start + period * np.arange(ticks, dtype=np.int64)
        raw = self.rng.normal(self._means, self._sds, size=(ticks, N_SENSORS))
        values = np.rint(np.clip(raw, 0, SENSOR_RAIL_MV)).astype(np.int64)
        every = cfg.battery_period_ms // period
        battery = [(int(t), self.battery_mV(int(t))) for t in tick_ms[::every]]
        self.now_ms = start + period * ticks
        self.sessions_run += 1
        return SessionRecording(self.glove, self.hand, start, self.now_ms, tick_ms, values, battery)

    def emit(self, frames, sink: Sink) -> tuple[int, int, int]:
        """Push frames to ``sink``; returns (frames, readings, battery frames)."""
        n = readings = battery = 0
        for frame in frames:
            if self._pacer is not None:
                self._pacer.wait(frame.timestamp_ms, FRAME_SIZE)
            try:
                sink(frame)
            except Exception as exc:
                raise SinkError(f"sink failed at frame {n}: {exc}") from exc
            n += 1
            readings += frame.kind == 0
            battery += frame.kind == 1
        return n, readings, battery

    def run_session(self, sink: Sink, duration_s: float | None = None) -> SessionSummary:
        rec = self.generate_session(duration_s)
        n, readings, battery = self.emit(rec.frames(), sink)
        return SessionSummary(
            index=self.sessions_run, subject=self.archetype.name, glove=self.glove,
            hand=self.hand, start_ms=rec.start_ms, stop_ms=rec.stop_ms, ticks=rec.ticks,
            readings=readings, battery_frames=battery, frames=n, bytes=n * FRAME_SIZE,
            battery_end_mV=self.battery_mV(rec.stop_ms))

    def run_experiment(self, n_sessions: int, sink: Sink) -> list[SessionSummary]:
        if n_sessions < 1:
            raise ValueError("n_sessions must be at least 1")
        return [self.run_session(sink) for _ in range(n_sessions)]


def run_session(archetype: SubjectArchetype, hand: HandRole, config: SimulatorConfig,
                sink: Sink, duration_s: float | None = None) -> SessionSummary:
    return GloveSimulator(archetype, hand, config).run_session(sink, duration_s)


def run_experiment(archetype: SubjectArchetype, hand: HandRole, n_sessions: int,
                   config: SimulatorConfig, sink: Sink) -> list[SessionSummary]:
    return GloveSimulator(archetype, hand, config).run_experiment(n_sessions, sink)


def zero_archetype(name: str = "zero", dominant_glove: Glove = Glove.LEFT,
                   task_time_s: float = 1.0) -> SubjectArchetype:
    """An archetype with every sensor at 0 mV and zero spread."""
    zeros = (0.0,) * N_SENSORS
    D, N = HandRole.DOMINANT, HandRole.NONDOMINANT
    return SubjectArchetype(name, dominant_glove, {D: zeros, N: zeros}, {D: zeros, N: zeros},
                            {D: task_time_s, N: task_time_s}, {D: 0.0, N: 0.0}, {D: 1, N: 1})


class ListSink(list):
    """Collects frames in memory."""

    def __call__(self, frame: SensorFrame) -> None:
        self.append(frame)


class FrameFileSink:
    """Writes encoded frames to a binary file or file object."""

    def __init__(self, target: str | Path | BinaryIO):
        if isinstance(target, (str, Path)):
            Path(target).parent.mkdir(parents=True, exist_ok=True)
            self._fh: BinaryIO = open(target, "wb")
            self._owns = True
        else:
            self._fh, self._owns = target, False

    def __call__(self, frame: SensorFrame) -> None:
        self._fh.write(encode_frame(frame))

    def close(self) -> None:
        if self._owns:
            self._fh.close()
        else:
            self._fh.flush()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


class SocketSink:
    """Streams encoded frames over a TCP connection to an ingest listener."""

    def __init__(self, host: str, port: int, timeout: float = 10.0):
        self._sock = socket.create_connection((host, port), timeout=timeout)

    def __call__(self, frame: SensorFrame) -> None:
        self._sock.sendall(encode_frame(frame))

    def close(self) -> None:
        try:
            self._sock.shutdown(socket.SHUT_WR)
        except OSError:
            pass
        self._sock.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def with_seed(config: SimulatorConfig, seed: int) -> SimulatorConfig:
    return replace(config, rng_seed=seed)
