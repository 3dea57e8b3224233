"""Store-level analyses: descriptive tables, ANOVAs, post-hoc tests and task times."""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .benchmark import NoData, task_time_report
from .ingest import SessionStore
from .layout import SENSOR_IDS, STRATEGIC_SENSORS, HandRole
from .stats import (AnovaTable, DegenerateDesign, InsufficientData, SSType, anova_two_way,
                    describe, holm_sidak_within)
from .stats.report import anova_lines, format_f, posthoc_lines

log = logging.getLogger(__name__)


def descriptive_lines(store: SessionStore, sensors: Sequence[int] = SENSOR_IDS) -> list[str]:
    lines = ["subject\thand\tsensor\tsessions\tn\tmean_mV\tsd_mV\tsem_mV"]
    for subject in store.subjects():
        for hand in HandRole:
            sessions = store.sessions(subject, hand)
            for sid in sensors:
                chunks = [s.values(sid) for s in sessions if len(s.samples[sid])]
                if not chunks:
                    continue
                d = describe(np.concatenate(chunks))
                lines.append(f"{subject}\t{hand.value}\tS{sid}\t{len(sessions)}\t{d.n}"
                             f"\t{d.mean:.3f}\t{d.sd:.3f}\t{d.sem:.3f}")
    return lines


def hand_session_observations(store: SessionStore, subject: str, sensor: int, n_sessions: int = 10):
    """(hand, session ordinal, value) columns for the first ``n_sessions`` of each hand."""
    per_hand = {h: store.sessions(subject, h)[:n_sessions] for h in HandRole}
    k = min(len(v) for v in per_hand.values())
    hands, sess, vals = [], [], []
    for hand, sessions in per_hand.items():
        for ordinal, s in enumerate(sessions[:k], 1):
            v = s.values(sensor)
            hands.append(np.full(len(v), hand.value, dtype=object))
            sess.append(np.full(len(v), ordinal))
            vals.append(v)
    if not vals:
        raise DegenerateDesign(f"{subject}: no sessions for both hands")
    return np.concatenate(hands), np.concatenate(sess), np.concatenate(vals).astype(float)


def hand_session_anova(store: SessionStore, subject: str, sensor: int, n_sessions: int = 10,
                       ss_type: SSType = SSType.TYPE_I) -> AnovaTable:
    return anova_two_way(hand_session_observations(store, subject, sensor, n_sessions),
                         "Hand", "Session", ss_type)


def expertise_observations(store: SessionStore, subjects: Sequence[str],
                           sensors: Sequence[int] = STRATEGIC_SENSORS,
                           hand: HandRole = HandRole.DOMINANT):
    subj, sens, vals = [], [], []
    for subject in subjects:
        for s in store.sessions(subject, hand):
            for sid in sensors:
                v = s.values(sid)
                subj.append(np.full(len(v), subject, dtype=object))
                sens.append(np.full(len(v), sid))
                vals.append(v)
    if not vals:
        raise DegenerateDesign("no observations for the expertise analysis")
    return np.concatenate(subj), np.concatenate(sens), np.concatenate(vals).astype(float)


@dataclass
class AnalysisReport:
    sections: dict[str, list[str]] = field(default_factory=dict)

    def text(self) -> str:
        parts = []
        for name, lines in self.sections.items():
            parts.append(f"## {name}")
            parts.extend(lines)
            parts.append("")
        return "\n".join(parts)

    def write(self, directory: str | Path) -> list[Path]:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        paths = []
        for name, lines in self.sections.items():
            p = directory / f"{name}.tsv"
            p.write_text("\n".join(lines) + "\n")
            paths.append(p)
        report = directory / "report.txt"
        report.write_text(self.text())
        return [report, *paths]


def _skip(reason: Exception) -> list[str]:
    return [f"# skipped: {reason}"]


def analyze_store(store: SessionStore, *, ss_type: SSType = SSType.TYPE_I, alpha: float = 0.05,
                  n_sessions: int = 10, sensors: Sequence[int] = STRATEGIC_SENSORS,
                  subjects: Sequence[str] | None = None, jobs: int = 1) -> AnalysisReport:
    subjects = list(subjects or store.subjects())
    report = AnalysisReport()
    report.sections["table1_descriptive"] = descriptive_lines(store)

    # Hand x Session per subject and sensor
    tasks = [(subj, sid) for subj in subjects for sid in sensors]

    def run(task):
        subj, sid = task
        try:
            return hand_session_anova(store, subj, sid, n_sessions, ss_type)
        except DegenerateDesign as exc:
            return exc

    with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
        results = list(pool.map(run, tasks))  # map keeps task order
    lines = [f"# Hand x Session two-way ANOVA per subject and sensor; Type {ss_type.value} SS",
             "subject\tsensor\tn\teffect\treport"]
    for (subj, sid), res in zip(tasks, results):
        if isinstance(res, Exception):
            lines.append(f"{subj}\tS{sid}\t\t\t# skipped: {res}")
            continue
        for row in res.effects:
            lines.append(f"{subj}\tS{sid}\t{res.n}\t{row.effect}\t{format_f(row, res.error.df)}")
    report.sections["table2_hand_session_anova"] = lines

    # Subject x Sensor on the dominant hand, then post-hoc within sensor
    try:
        obs = expertise_observations(store, subjects, sensors)
        table = anova_two_way(obs, "Subject", "Sensor", ss_type)
        report.sections["table3_expertise_anova"] = anova_lines(table)
        post = []
        for level, comps in holm_sidak_within(obs, table, alpha).items():
            post += posthoc_lines(f"Sensor {level} (alpha={alpha})", comps)
        report.sections["table4_posthoc"] = post
    except DegenerateDesign as exc:
        report.sections["table3_expertise_anova"] = _skip(exc)
        report.sections["table4_posthoc"] = _skip(exc)

    if len(subjects) == 2:
        try:
            tt = task_time_report(store, subjects[0], subjects[1])
            if tt.ttest.diff_of_means < 0:
                # report the difference as a positive quantity, slower group first
                tt = task_time_report(store, subjects[1], subjects[0])
            report.sections["table5_task_times"] = tt.lines()
        except (InsufficientData, NoData) as exc:
            report.sections["table5_task_times"] = _skip(exc)
    return report


def read_observations(path: str | Path):
    """Parse ``value<TAB>factorA<TAB>factorB`` lines; a non-numeric first row is a header."""
    fa, fb, vals = [], [], []
    names = ("A", "B")
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].rstrip()
        if not line:
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise ValueError(f"{path}:{lineno}: expected value<TAB>factorA<TAB>factorB")
        try:
            v = float(parts[0])
        except ValueError:
            if not vals:
                names = (parts[1], parts[2])
                continue
            raise ValueError(f"{path}:{lineno}: bad value {parts[0]!r}") from None
        vals.append(v)
        fa.append(parts[1])
        fb.append(parts[2])
    return names, (np.array(fa, dtype=object), np.array(fb, dtype=object), np.array(vals))
