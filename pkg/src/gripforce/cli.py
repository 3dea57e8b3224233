"""Command-line entry point: ``gripforce <subcommand> ...``.

Exit codes: 0 success, 1 I/O failure, 2 usage or configuration error.
Defaults may come from a ``key=value`` file given with ``--config``; flags on
the command line win.  ``GRIPFORCE_STORE`` sets the default store directory.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from . import fixtures
from .analysis import analyze_store, read_observations
from .benchmark import (NoData, SensorMissing, Thresholds, build_profile, compare_to_reference,
                        load_annotations, precision_report, profile_plot_rows, task_time_report)
from .glove_sim import (FrameFileSink, GloveSimulator, SimulatorConfig, SinkError, SocketSink,
                        get_archetype)
from .ingest import SessionStore, StoreError, ingest_concurrently, ingest_file, serve
from .layout import STRATEGIC_SENSORS, HandRole, parse_glove
from .protocol import Glove
from .stats import DegenerateDesign, InsufficientData, SSType, anova_two_way
from .stats.report import anova_lines

log = logging.getLogger("gripforce")

STORE_ENV = "GRIPFORCE_STORE"
EXIT_OK, EXIT_IO, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _hostport(text: str) -> tuple[str, int]:
    host, _, port = text.rpartition(":")
    if not port.isdigit():
        raise argparse.ArgumentTypeError(f"expected HOST:PORT, got {text!r}")
    return host or "127.0.0.1", int(port)


def _sensor_list(text: str) -> tuple[int, ...]:
    try:
        ids = tuple(int(s.strip().lstrip("Ss")) for s in text.split(",") if s.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad sensor list {text!r}") from None
    if not ids or any(not 1 <= i <= 12 for i in ids):
        raise argparse.ArgumentTypeError("sensor ids must be in 1..12")
    return ids


def _alpha(text: str) -> float:
    a = float(text)
    if not 0 < a < 1:
        raise argparse.ArgumentTypeError("alpha must lie in (0, 1)")
    return a


def read_config(path: str | Path) -> dict[str, str]:
    out = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key=value")
        key, value = line.split("=", 1)
        out[key.strip().replace("-", "_")] = value.strip()
    return out


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gripforce", description=__doc__.splitlines()[0])
    p.add_argument("--config", help="key=value file supplying default option values")
    p.add_argument("--jobs", type=int, default=1, help="worker threads for per-sensor analyses")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="run the virtual glove and write or stream frames")
    s.add_argument("--archetype", default="expert", help="builtin name or key=value file")
    s.add_argument("--hand", type=HandRole.parse, default=HandRole.DOMINANT)
    s.add_argument("--sessions", type=int, help="default: the archetype's session count")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--duration", type=float, help="force every session to this many seconds")
    s.add_argument("--drain", type=float, default=5.0, help="battery drain in mV per minute")
    s.add_argument("--realtime", action="store_true", help="pace frames in wall-clock time")
    dest = s.add_mutually_exclusive_group(required=True)
    dest.add_argument("--out", type=Path, help="raw frame file")
    dest.add_argument("--connect", type=_hostport, metavar="HOST:PORT", help="ingest listener")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("ingest", help="decode frame streams into a session store")
    src = s.add_mutually_exclusive_group(required=True)
    src.add_argument("--input", type=Path, action="append", help="frame file (repeatable)")
    src.add_argument("--listen", type=_hostport, metavar="HOST:PORT")
    s.add_argument("--connections", type=int, default=1, help="glove connections to accept")
    s.add_argument("--store", type=Path)
    s.add_argument("--archetype", help="take subject name and dominant glove from an archetype")
    s.add_argument("--subject")
    s.add_argument("--dominant-glove", type=parse_glove)
    s.set_defaults(func=cmd_ingest)

    s = sub.add_parser("analyze", help="descriptive, ANOVA, post-hoc and task-time reports")
    s.add_argument("--store", type=Path)
    s.add_argument("--observations", type=Path, help="value<TAB>factorA<TAB>factorB file")
    s.add_argument("--out", type=Path, help="directory for TSV reports")
    s.add_argument("--figures", type=Path, help="directory for PNG figures")
    s.add_argument("--ss-type", type=SSType.parse, default=SSType.TYPE_I)
    s.add_argument("--alpha", type=_alpha, default=0.05)
    s.add_argument("--sessions", type=int, default=10, help="sessions per hand in Hand x Session")
    s.add_argument("--sensors", type=_sensor_list, default=STRATEGIC_SENSORS)
    s.add_argument("--subjects", type=lambda t: [x for x in t.split(",") if x])
    s.set_defaults(func=cmd_analyze)

    s = sub.add_parser("benchmark", help="score a trainee against a reference profile")
    s.add_argument("--store", type=Path)
    s.add_argument("--trainee", required=True)
    s.add_argument("--reference", required=True)
    s.add_argument("--hand", type=HandRole.parse, default=HandRole.DOMINANT)
    s.add_argument("--sensors", type=_sensor_list, default=STRATEGIC_SENSORS)
    s.add_argument("--annotations", action="append", default=[], metavar="SUBJECT=PATH")
    s.add_argument("--expert-below", type=float, default=2.0)
    s.add_argument("--novice-at", type=float, default=5.0)
    s.add_argument("--out", type=Path)
    s.add_argument("--figures", type=Path)
    s.set_defaults(func=cmd_benchmark)

    s = sub.add_parser("fixture", help="write reference fixtures")
    s.add_argument("kind", choices=["task-times", "annotations", "archetype"])
    s.add_argument("--out", type=Path, required=True)
    s.add_argument("--archetype", default="expert")
    s.set_defaults(func=cmd_fixture)
    return p


def _store_dir(args) -> Path:
    store = args.store or os.environ.get(STORE_ENV)
    if not store:
        raise UsageError(f"no store directory: pass --store or set {STORE_ENV}")
    return Path(store)


def _open_store(path: Path) -> SessionStore:
    if (path / "manifest.tsv").is_file():
        return SessionStore.open(path)
    return SessionStore(path)


def cmd_simulate(args) -> int:
    try:
        arch = get_archetype(args.archetype)
    except (KeyError, ValueError) as exc:
        raise UsageError(str(exc).strip("'\"")) from None
    n = args.sessions if args.sessions is not None else arch.session_count[args.hand]
    if n < 1:
        raise UsageError("--sessions must be at least 1")
    config = SimulatorConfig(rng_seed=args.seed, battery_drain_mV_per_min=args.drain,
                             realtime=args.realtime)
    sim = GloveSimulator(arch, args.hand, config)
    sink = FrameFileSink(args.out) if args.out else SocketSink(*args.connect)
    with sink:
        for _ in range(n):
            print(sim.run_session(sink, args.duration).line())
    return EXIT_OK


def cmd_ingest(args) -> int:
    subject, glove = args.subject, args.dominant_glove
    if args.archetype:
        try:
            arch = get_archetype(args.archetype)
        except (KeyError, ValueError) as exc:
            raise UsageError(str(exc).strip("'\"")) from None
        subject = subject or arch.name
        glove = glove if glove is not None else arch.dominant_glove
    if not subject:
        raise UsageError("ingest needs --subject or --archetype")
    glove = Glove.LEFT if glove is None else glove
    store = _open_store(_store_dir(args))
    if args.listen:
        host, port = args.listen
        reports = serve(store, subject, glove, host=host, port=port, connections=args.connections)
    elif len(args.input) == 1:
        reports = [ingest_file(args.input[0], store, subject, glove)]
    else:
        for path in args.input:
            if not path.is_file():
                raise StoreError(f"cannot read {path}")
        handles = [open(p, "rb") for p in args.input]
        try:
            reports = ingest_concurrently(handles, store, subject, glove)
        finally:
            for h in handles:
                h.close()
    store.flush()
    for rep in reports:
        print(rep.summary())
    for s in store.sessions(subject):
        print(f"session\t{s.subject}\t{s.hand.value}\t{s.session_id}\t{s.start_ms}\t{s.stop_ms}"
              f"\t{s.sample_count}")
    return EXIT_OK


def cmd_analyze(args) -> int:
    if args.observations:
        (fa, fb), obs = read_observations(args.observations)
        table = anova_two_way(obs, fa, fb, args.ss_type)
        text = "\n".join(anova_lines(table))
        print(text)
        if args.out:
            args.out.mkdir(parents=True, exist_ok=True)
            (args.out / "anova.tsv").write_text(text + "\n")
        return EXIT_OK
    store = SessionStore.open(_store_dir(args))
    report = analyze_store(store, ss_type=args.ss_type, alpha=args.alpha, n_sessions=args.sessions,
                           sensors=args.sensors, subjects=args.subjects, jobs=args.jobs)
    print(report.text())
    if args.out:
        report.write(args.out)
    if args.figures:
        from .plotting import plot_sensor_boxes, plot_session_profiles, plot_task_times
        profiles = []
        for subject in args.subjects or store.subjects():
            for hand in HandRole:
                try:
                    profiles.append(build_profile(store, subject, hand))
                except NoData:
                    pass
        if profiles:
            plot_sensor_boxes(profiles, args.figures / "sensor_boxes.png", args.sensors)
            plot_session_profiles(profiles, args.figures / "session_profiles.png", args.sensors)
        subjects = args.subjects or store.subjects()
        if len(subjects) == 2:
            try:
                plot_task_times(task_time_report(store, *subjects), args.figures / "task_times.png")
            except InsufficientData:
                pass
    return EXIT_OK


def cmd_benchmark(args) -> int:
    store = SessionStore.open(_store_dir(args))
    try:
        trainee = build_profile(store, args.trainee, args.hand)
        reference = build_profile(store, args.reference, args.hand)
    except NoData as exc:
        raise UsageError(str(exc)) from None
    try:
        tt = task_time_report(store, args.trainee, args.reference, args.hand).ttest
    except InsufficientData:
        tt = None
    precision = None
    if args.annotations:
        events = {}
        for item in args.annotations:
            subject, sep, path = item.partition("=")
            if not sep:
                raise UsageError(f"--annotations expects SUBJECT=PATH, got {item!r}")
            events[subject] = load_annotations(path)
        precision = precision_report(events)
    thresholds = Thresholds(args.expert_below, args.novice_at)
    report = compare_to_reference(trainee, reference, args.sensors, thresholds,
                                  task_time=tt, precision=precision)
    text = "\n".join(report.lines())
    print(text)
    if args.out:
        args.out.mkdir(parents=True, exist_ok=True)
        (args.out / "expertise_report.tsv").write_text(text + "\n")
        for prof in (trainee, reference):
            name = f"plotdata_{prof.subject}_{prof.hand.value}.csv"
            (args.out / name).write_text("\n".join(profile_plot_rows(prof, args.sensors)) + "\n")
    if args.figures:
        from .plotting import plot_deviations, plot_session_profiles
        plot_deviations(report, args.figures / "deviations.png")
        plot_session_profiles([reference, trainee], args.figures / "benchmark_profiles.png",
                              args.sensors)
    return EXIT_OK


def cmd_fixture(args) -> int:
    if args.kind == "task-times":
        store = fixtures.task_time_store(args.out)
        print(f"wrote {len(store)} sessions to {args.out}")
    elif args.kind == "annotations":
        for subject, path in fixtures.write_precision_annotations(args.out).items():
            print(f"{subject}\t{path}")
    else:
        from .glove_sim import dump_archetype
        try:
            arch = get_archetype(args.archetype)
        except KeyError as exc:
            raise UsageError(str(exc).strip("'\"")) from None
        args.out.parent.mkdir(parents=True, exist_ok=True)
        args.out.write_text(dump_archetype(arch))
        print(args.out)
    return EXIT_OK


def _apply_config(parser: argparse.ArgumentParser, config: dict[str, str]) -> None:
    subparsers = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    for sp in [parser, *subparsers.choices.values()]:
        known = {}
        for action in sp._actions:
            if action.dest in config:
                value = config[action.dest]
                if isinstance(action, argparse._StoreTrueAction):
                    value = value.lower() in ("1", "true", "yes", "on")
                elif isinstance(action, argparse._AppendAction):
                    value = [action.type(v) if action.type else v for v in value.split(",")]
                known[action.dest] = value
        sp.set_defaults(**known)


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    try:
        if known.config:
            _apply_config(parser, read_config(known.config))
    except (OSError, UsageError) as exc:
        print(f"gripforce: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, DegenerateDesign, SensorMissing, ValueError) as exc:
        print(f"gripforce {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, SinkError) as exc:
        print(f"gripforce {args.command}: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
