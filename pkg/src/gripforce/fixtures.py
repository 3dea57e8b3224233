"""Reference fixtures: moment-matched task-time sessions and precision annotations."""
from __future__ import annotations

from pathlib import Path

import numpy as np

from .benchmark import PrecisionEvent, PrecisionKind, dump_annotations
from .ingest import SessionLog, SessionStore
from .layout import HandRole
from .protocol import Glove

# (n, mean s, sd s) of dominant-hand task times
TASK_TIMES = {"novice": (11, 15.424, 4.832), "expert": (10, 8.882, 1.141)}
DOMINANT_GLOVE = {"expert": Glove.LEFT, "novice": Glove.RIGHT}

# counts in PrecisionKind order
PRECISION_COUNTS = {"expert": (3, 0, 1, 0, 0), "novice": (20, 1, 8, 2, 1)}


def moment_matched(n: int, mean: float, sd: float) -> np.ndarray:
    """``n`` evenly spread values whose sample mean and SD are exactly ``mean``, ``sd``."""
    z = np.linspace(-1.0, 1.0, n)
    z = (z - z.mean()) / z.std(ddof=1)
    return mean + sd * z


def task_time_store(root: str | Path | None = None, gap_ms: int = 2000) -> SessionStore:
    """Sample-free sessions whose durations reproduce the task-time moments."""
    store = SessionStore(root)
    for subject, (n, mean, sd) in TASK_TIMES.items():
        t = 0
        for dur in moment_matched(n, mean, sd):
            stop = t + int(round(dur * 1000))
            store.add(SessionLog(0, subject, HandRole.DOMINANT, DOMINANT_GLOVE[subject], t, stop))
            t = stop + gap_ms
    return store


def precision_events(n_sessions: dict[str, int] | None = None) -> dict[str, list[PrecisionEvent]]:
    """Annotation events reproducing the published precision counts, spread over sessions."""
    n_sessions = n_sessions or {"expert": 10, "novice": 11}
    out = {}
    for subject, counts in PRECISION_COUNTS.items():
        events, k = [], 0
        for kind, count in zip(PrecisionKind, counts):
            for _ in range(count):
                events.append(PrecisionEvent(1 + k % n_sessions[subject], kind, 1000 * (1 + k)))
                k += 1
        out[subject] = sorted(events, key=lambda e: (e.session_id, e.timestamp_ms))
    return out


def write_precision_annotations(directory: str | Path) -> dict[str, Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = {}
    for subject, events in precision_events().items():
        paths[subject] = directory / f"{subject}_annotations.tsv"
        dump_annotations(events, paths[subject])
    return paths
