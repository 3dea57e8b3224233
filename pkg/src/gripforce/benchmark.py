"""Grip-force profiles and trainee-versus-reference expertise reports.

A trainee is scored sensor by sensor as ``|mean_trainee - mean_ref| / sd_ref``
(the reference SD floored at 1 mV) over the strategic sensors.  The overall
flag is ExpertLike when every score is below 2, NoviceLike when any score is
5 or more, and Intermediate otherwise.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .ingest import SessionLog, SessionStore
from .layout import SENSOR_IDS, STRATEGIC_SENSORS, HandRole
from .stats import (BoxSummary, DescriptiveStats, InsufficientData, TTestResult, box_summary,
                    describe, t_test_two_sample)
from .stats.report import format_p


class NoData(LookupError):
    pass


class SensorMissing(KeyError):
    pass


# --- precision events -------------------------------------------------------

class PrecisionKind(enum.Enum):
    TRAJECTORY_ADJUSTMENT = "trajectory_adjustment"
    ACCIDENTAL_RELEASE = "accidental_release"
    UNSUCCESSFUL_GRASP = "unsuccessful_grasp"
    BOUNDARY_COLLISION = "boundary_collision"
    DROP_OUTSIDE_TARGET = "drop_outside_target"

    @classmethod
    def parse(cls, text: str) -> "PrecisionKind":
        key = text.strip().lower()
        for k in cls:
            if key in (k.value, k.name.lower()):
                return k
        raise ValueError(f"unknown precision event kind {text!r}")


KIND_LABELS = {
    PrecisionKind.TRAJECTORY_ADJUSTMENT: "trajectory adjustments",
    PrecisionKind.ACCIDENTAL_RELEASE: "accidental releases",
    PrecisionKind.UNSUCCESSFUL_GRASP: "unsuccessful grasps",
    PrecisionKind.BOUNDARY_COLLISION: "boundary collisions",
    PrecisionKind.DROP_OUTSIDE_TARGET: "drops outside target",
}


@dataclass(frozen=True)
class PrecisionEvent:
    session_id: int
    kind: PrecisionKind
    timestamp_ms: int


ANNOTATION_HEADER = "session_id\tkind\ttimestamp_ms"


def load_annotations(path: str | Path) -> list[PrecisionEvent]:
    """Read ``session_id<TAB>kind<TAB>timestamp_ms`` lines (header and # comments optional)."""
    events = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line or line == ANNOTATION_HEADER:
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise ValueError(f"{path}:{lineno}: expected session_id<TAB>kind<TAB>timestamp_ms")
        events.append(PrecisionEvent(int(parts[0]), PrecisionKind.parse(parts[1]), int(parts[2])))
    return events


def dump_annotations(events: Iterable[PrecisionEvent], path: str | Path) -> None:
    lines = [ANNOTATION_HEADER] + [f"{e.session_id}\t{e.kind.value}\t{e.timestamp_ms}" for e in events]
    Path(path).write_text("\n".join(lines) + "\n")


@dataclass(frozen=True)
class PrecisionTable:
    subjects: tuple[str, ...]
    counts: dict[str, tuple[int, ...]]  # subject -> counts in PrecisionKind order

    def row(self, subject: str) -> tuple[int, ...]:
        return self.counts[subject]

    def lines(self) -> list[str]:
        out = ["event\t" + "\t".join(self.subjects)]
        for k, kind in enumerate(PrecisionKind):
            out.append(KIND_LABELS[kind] + "\t" + "\t".join(str(self.counts[s][k]) for s in self.subjects))
        return out


def precision_report(events: Mapping[str, Iterable[PrecisionEvent]]) -> PrecisionTable:
    counts = {}
    for subject, evs in events.items():
        tally = dict.fromkeys(PrecisionKind, 0)
        for e in evs:
            tally[e.kind] += 1
        counts[subject] = tuple(tally[k] for k in PrecisionKind)
    return PrecisionTable(tuple(events), counts)


# --- profiles ---------------------------------------------------------------

@dataclass(frozen=True)
class SensorProfile:
    stats: DescriptiveStats
    box: BoxSummary


@dataclass(frozen=True)
class SessionProfile:
    session_id: int
    duration_s: float
    stats: dict[int, DescriptiveStats]


@dataclass(frozen=True)
class GripProfile:
    subject: str
    hand: HandRole
    sensors: dict[int, SensorProfile]
    sessions: tuple[SessionProfile, ...] = field(default=())

    def mean(self, sensor_id: int) -> float:
        return self.sensors[sensor_id].stats.mean

    def sd(self, sensor_id: int) -> float:
        return self.sensors[sensor_id].stats.sd

    @property
    def n(self) -> int:
        return sum(p.stats.n for p in self.sensors.values())


def profile_from_sessions(sessions: Iterable[SessionLog], subject: str, hand: HandRole) -> GripProfile:
    sessions = sorted(sessions, key=lambda s: s.session_id)
    if not sessions:
        raise NoData(f"no sessions for {subject} ({hand.value} hand)")
    sensors = {}
    for sid in SENSOR_IDS:
        chunks = [s.values(sid) for s in sessions if len(s.samples[sid])]
        if chunks:
            allv = np.concatenate(chunks)
            sensors[sid] = SensorProfile(describe(allv), box_summary(allv))
    if not sensors:
        raise NoData(f"sessions for {subject} ({hand.value} hand) contain no samples")
    per_session = tuple(
        SessionProfile(s.session_id, s.duration_s,
                       {sid: describe(s.values(sid)) for sid in SENSOR_IDS if len(s.samples[sid])})
        for s in sessions)
    return GripProfile(subject, hand, sensors, per_session)


def build_profile(store: SessionStore, subject: str, hand: HandRole) -> GripProfile:
    return profile_from_sessions(store.sessions(subject, hand), subject, hand)


def profile_plot_rows(profile: GripProfile, sensors: Iterable[int] = STRATEGIC_SENSORS) -> list[str]:
    """CSV rows of per-session mean mV per sensor."""
    sensors = list(sensors)
    rows = ["session," + ",".join(f"S{s}" for s in sensors)]
    for sp in profile.sessions:
        cells = [f"{sp.stats[s].mean:.3f}" if s in sp.stats else "" for s in sensors]
        rows.append(f"{sp.session_id}," + ",".join(cells))
    return rows


# --- expertise comparison ---------------------------------------------------

class ExpertiseFlag(enum.Enum):
    EXPERT_LIKE = "ExpertLike"
    INTERMEDIATE = "Intermediate"
    NOVICE_LIKE = "NoviceLike"


@dataclass(frozen=True)
class Thresholds:
    expert_below: float = 2.0
    novice_at: float = 5.0
    sd_floor_mV: float = 1.0

    def classify(self, scores: Iterable[float]) -> ExpertiseFlag:
        scores = list(scores)
        if any(s >= self.novice_at for s in scores):
            return ExpertiseFlag.NOVICE_LIKE
        if all(s < self.expert_below for s in scores):
            return ExpertiseFlag.EXPERT_LIKE
        return ExpertiseFlag.INTERMEDIATE


@dataclass(frozen=True)
class SensorDeviation:
    sensor_id: int
    trainee_mean: float
    reference_mean: float
    reference_sd: float
    score: float

    @property
    def direction(self) -> str:
        if self.trainee_mean > self.reference_mean:
            return "excess"
        if self.trainee_mean < self.reference_mean:
            return "deficit"
        return "match"


@dataclass(frozen=True)
class ExpertiseReport:
    trainee: str
    reference: str
    hand: HandRole
    sensors: tuple[int, ...]
    deviations: dict[int, SensorDeviation]
    flag: ExpertiseFlag
    thresholds: Thresholds
    task_time: TTestResult | None = None
    precision: PrecisionTable | None = None

    def score(self, sensor_id: int) -> float:
        return self.deviations[sensor_id].score

    def lines(self) -> list[str]:
        out = [f"# expertise report: trainee={self.trainee} reference={self.reference} "
               f"hand={self.hand.value}",
               f"# thresholds: ExpertLike if all < {self.thresholds.expert_below:g}, "
               f"NoviceLike if any >= {self.thresholds.novice_at:g}",
               "sensor\ttrainee_mean_mV\treference_mean_mV\treference_sd_mV\tdeviation\tdirection"]
        for sid in self.sensors:
            d = self.deviations[sid]
            out.append(f"S{sid}\t{d.trainee_mean:.3f}\t{d.reference_mean:.3f}\t{d.reference_sd:.3f}"
                       f"\t{d.score:.3f}\t{d.direction}")
        out.append(f"flag\t{self.flag.value}")
        if self.task_time is not None:
            tt = self.task_time
            out += ["# task times (trainee minus reference)",
                    f"diff_of_means_s\t{tt.diff_of_means:.3f}", f"t\t{tt.t:.3f}", f"df\t{tt.df}",
                    f"p\t{format_p(tt.p)}", f"ci95\t{tt.ci95_low:.3f}\t{tt.ci95_high:.3f}"]
        if self.precision is not None:
            out += ["# precision events"] + self.precision.lines()
        return out


def compare_to_reference(trainee: GripProfile, reference: GripProfile,
                         sensors: Iterable[int] = STRATEGIC_SENSORS,
                         thresholds: Thresholds = Thresholds(), *,
                         task_time: TTestResult | None = None,
                         precision: PrecisionTable | None = None) -> ExpertiseReport:
    sensors = tuple(sorted(set(sensors)))
    for who, prof in (("trainee", trainee), ("reference", reference)):
        missing = [s for s in sensors if s not in prof.sensors]
        if missing:
            raise SensorMissing(f"{who} profile {prof.subject!r} lacks sensors "
                                + ", ".join(f"S{s}" for s in missing))
    deviations = {}
    for sid in sensors:
        mt, mr, sr = trainee.mean(sid), reference.mean(sid), reference.sd(sid)
        score = abs(mt - mr) / max(sr, thresholds.sd_floor_mV)
        deviations[sid] = SensorDeviation(sid, mt, mr, sr, score)
    flag = thresholds.classify(d.score for d in deviations.values())
    return ExpertiseReport(trainee.subject, reference.subject, trainee.hand, sensors, deviations,
                           flag, thresholds, task_time, precision)


# --- task times -------------------------------------------------------------

@dataclass(frozen=True)
class TaskTimeReport:
    subject_a: str
    subject_b: str
    hand: HandRole
    times_a: tuple[float, ...]
    times_b: tuple[float, ...]
    ttest: TTestResult

    def lines(self) -> list[str]:
        out = [f"# task times, {self.hand.value} hand: {self.subject_a} vs {self.subject_b}",
               "subject\tsession\ttime_s"]
        for name, times in ((self.subject_a, self.times_a), (self.subject_b, self.times_b)):
            out += [f"{name}\t{i}\t{t:.3f}" for i, t in enumerate(times, 1)]
        return out + self.ttest.lines(self.subject_a, self.subject_b)


def task_time_report(store: SessionStore, subject_a: str, subject_b: str,
                     hand: HandRole = HandRole.DOMINANT) -> TaskTimeReport:
    times = []
    for subject in (subject_a, subject_b):
        sessions = store.sessions(subject, hand)
        if len(sessions) < 2:
            raise InsufficientData(f"{subject}: need >= 2 {hand.value}-hand sessions, found {len(sessions)}")
        times.append(tuple(s.duration_s for s in sessions))
    return TaskTimeReport(subject_a, subject_b, hand, times[0], times[1],
                          t_test_two_sample(times[0], times[1]))
