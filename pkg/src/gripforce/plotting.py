"""Figure rendering for reports.  Uses the non-interactive Agg backend."""
from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .benchmark import ExpertiseReport, GripProfile, TaskTimeReport  # noqa: E402
from .layout import STRATEGIC_SENSORS  # noqa: E402

RC = {
    "font.size": 9,
    "axes.titlesize": 10,
    "axes.labelsize": 9,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "legend.frameon": False,
    "savefig.dpi": 150,
}


def _figure(ncols: int = 1, width: float = 6.5, height: float | None = None):
    golden_ratio = (5 ** 0.5 - 1) / 2
    if height is None:
        height = width * golden_ratio / max(1, ncols / 2)
    with plt.rc_context(RC):
        fig, axes = plt.subplots(1, ncols, figsize=(width, height), squeeze=False)
    return fig, axes[0]


def _save(fig, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with plt.rc_context(RC):
        fig.tight_layout()
        fig.savefig(path)
    plt.close(fig)
    return path


def plot_sensor_boxes(profiles: Sequence[GripProfile], path: str | Path,
                      sensors: Sequence[int] = STRATEGIC_SENSORS) -> Path:
    """One panel per profile, one box per sensor, drawn from precomputed summaries."""
    fig, axes = _figure(len(profiles), width=3.2 * len(profiles), height=3.0)
    for ax, prof in zip(axes, profiles):
        stats = []
        for sid in sensors:
            if sid not in prof.sensors:
                continue
            b = prof.sensors[sid].box
            stats.append(dict(label=f"S{sid}", q1=b.q1, med=b.median, q3=b.q3,
                              whislo=b.whisker_low, whishi=b.whisker_high, fliers=list(b.outliers)))
        if stats:
            ax.bxp(stats, showfliers=True, flierprops=dict(markersize=2, alpha=0.3))
        ax.set_title(f"{prof.subject}, {prof.hand.value} hand")
        ax.set_ylabel("sensor output (mV)")
    return _save(fig, path)


def plot_session_profiles(profiles: Sequence[GripProfile], path: str | Path,
                          sensors: Sequence[int] = STRATEGIC_SENSORS) -> Path:
    """Mean output per session and sensor, one panel per profile."""
    fig, axes = _figure(len(profiles), width=3.2 * len(profiles), height=3.0)
    for ax, prof in zip(axes, profiles):
        for sid in sensors:
            pts = [(s.session_id, s.stats[sid].mean) for s in prof.sessions if sid in s.stats]
            if pts:
                x, y = zip(*pts)
                ax.plot(x, y, marker="o", markersize=3, label=f"S{sid}")
        ax.set_title(f"{prof.subject}, {prof.hand.value} hand")
        ax.set_xlabel("session")
        ax.set_ylabel("mean output (mV)")
        ax.legend(fontsize=7)
    return _save(fig, path)


def plot_task_times(report: TaskTimeReport, path: str | Path) -> Path:
    fig, (ax,) = _figure()
    for name, times in ((report.subject_a, report.times_a), (report.subject_b, report.times_b)):
        ax.plot(range(1, len(times) + 1), times, marker="o", label=name)
    ax.set_xlabel("session")
    ax.set_ylabel("task time (s)")
    ax.legend()
    return _save(fig, path)


def plot_deviations(report: ExpertiseReport, path: str | Path) -> Path:
    fig, (ax,) = _figure(width=4.5, height=3.0)
    labels = [f"S{s}" for s in report.sensors]
    scores = [report.score(s) for s in report.sensors]
    ax.bar(labels, scores, color="0.5")
    ax.axhline(report.thresholds.expert_below, ls="--", lw=0.8, color="tab:green")
    ax.axhline(report.thresholds.novice_at, ls="--", lw=0.8, color="tab:red")
    ax.set_ylabel("normalized deviation")
    ax.set_title(f"{report.trainee} vs {report.reference}: {report.flag.value}")
    return _save(fig, path)
