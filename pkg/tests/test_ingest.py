import io
import threading

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gripforce.glove_sim import (GloveSimulator, ListSink, SimulatorConfig, SocketSink,
                                 run_experiment, run_session, zero_archetype)
from gripforce.ingest import (MANIFEST_HEADER, SENSOR_HEADER, SensorSeries, SessionLog,
                              SessionStore, StoreError, Transition, battery_watchdog,
                              ingest_concurrently, ingest_file, ingest_stream,
                              log_from_recording, read_sensor_file, serve, write_sensor_files)
from gripforce.layout import HandRole
from gripforce.protocol import FrameKind, Glove, SensorFrame, encode_frames

D, N = HandRole.DOMINANT, HandRole.NONDOMINANT


def frames_of(archetype, hand, n, seed=42):
    sink = ListSink()
    run_experiment(archetype, hand, n, SimulatorConfig(rng_seed=seed), sink)
    return sink


def test_zero_session():
    sink = ListSink()
    run_session(zero_archetype(), D, SimulatorConfig(), sink, duration_s=1.0)
    store = SessionStore()
    rep = ingest_stream(encode_frames(sink), store, "zero")
    assert len(rep.sessions) == 1 and rep.samples_persisted == 600
    assert rep.decode_errors == [] and rep.orphans == 0
    (s,) = store.sessions()
    assert s.key == ("zero", D, 1) and all(len(s.samples[k]) == 50 for k in range(1, 13))


def test_stop_without_start():
    body = [SensorFrame.reading(Glove.LEFT, k, 20, 5) for k in range(1, 13)]
    rep = ingest_stream(encode_frames(body + [SensorFrame.mark(Glove.LEFT, 40, False)]),
                        SessionStore(), "x")
    assert rep.sessions == [] and rep.orphans == 12 and rep.unmatched_stops == 1


def test_conservation_ten_sessions(archetypes):
    sink = frames_of(archetypes[0], D, 10)
    store = SessionStore()
    rep = ingest_stream(encode_frames(sink), store, "expert")
    assert len(store) == 10
    emitted = sum(f.kind is FrameKind.READING for f in sink)
    assert sum(s.sample_count for s in store.sessions()) == emitted == rep.samples_persisted
    assert [s.session_id for s in store.sessions("expert", D)] == list(range(1, 11))


def test_ingest_equals_direct_build(archetypes):
    sim = GloveSimulator(archetypes[1], N, SimulatorConfig(rng_seed=4))
    store = SessionStore()
    recs = [sim.generate_session() for _ in range(3)]
    frames = [f for r in recs for f in r.frames()]
    ingest_stream(encode_frames(frames), store, "novice", dominant_glove=Glove.RIGHT)
    for i, (rec, got) in enumerate(zip(recs, store.sessions()), 1):
        want = log_from_recording(rec, "novice", i)
        assert got == want


def test_chunked_source_and_file(archetypes, tmp_path):
    data = encode_frames(frames_of(archetypes[0], D, 2))
    a, b = SessionStore(), SessionStore()
    ingest_stream([data[i:i + 777] for i in range(0, len(data), 777)], a, "expert")
    ingest_stream(io.BytesIO(data), b, "expert")
    path = tmp_path / "run.bin"
    path.write_bytes(data)
    c = SessionStore()
    ingest_file(path, c, "expert")
    assert a.sessions() == b.sessions() == c.sessions()
    with pytest.raises(StoreError):
        ingest_file(tmp_path / "missing.bin", c, "expert")


def test_double_start_closes_open_session():
    g = Glove.LEFT
    frames = [SensorFrame.mark(g, 0, True), SensorFrame.reading(g, 1, 0, 9),
              SensorFrame.mark(g, 100, True), SensorFrame.reading(g, 1, 100, 8),
              SensorFrame.mark(g, 200, False)]
    store = SessionStore()
    rep = ingest_stream(encode_frames(frames), store, "x")
    assert [(s.start_ms, s.stop_ms, s.sample_count) for s in store.sessions()] == [(0, 100, 1), (100, 200, 1)]
    assert rep.orphans == 0


def test_unterminated_session_is_orphaned():
    g = Glove.RIGHT
    frames = [SensorFrame.mark(g, 0, True)] + [SensorFrame.reading(g, k, 0, 1) for k in range(1, 13)]
    rep = ingest_stream(encode_frames(frames), SessionStore(), "x")
    assert rep.sessions == [] and rep.orphans == 12 and rep.unterminated == 1


def test_late_and_out_of_order_samples_are_orphans():
    g = Glove.LEFT
    frames = [SensorFrame.mark(g, 100, True), SensorFrame.reading(g, 1, 50, 1),
              SensorFrame.reading(g, 1, 120, 2), SensorFrame.reading(g, 1, 120, 3),
              SensorFrame.reading(g, 2, 300, 4), SensorFrame.mark(g, 200, False)]
    store = SessionStore()
    rep = ingest_stream(encode_frames(frames), store, "x")
    assert rep.orphans == 3 and rep.samples_persisted == 1
    assert rep.samples_persisted + rep.orphans == rep.readings_decoded


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.sampled_from(Glove), st.integers(0, 3), st.integers(1, 12),
                          st.integers(0, 500)), max_size=60))
def test_every_reading_is_persisted_or_orphaned(events):
    frames = []
    for glove, kind, sid, ts in events:
        if kind < 2:
            frames.append(SensorFrame.reading(glove, sid, ts, 1))
        else:
            frames.append(SensorFrame.mark(glove, ts, kind == 2))
    rep = ingest_stream(encode_frames(frames), SessionStore(), "p")
    assert rep.samples_persisted + rep.orphans == rep.readings_decoded


def test_corruption_is_reported_not_fatal(archetypes):
    data = bytearray(encode_frames(frames_of(archetypes[0], D, 1)))
    data[11 * 50 + 3] ^= 0xFF
    rep = ingest_stream(bytes(data), SessionStore(), "expert")
    assert len(rep.decode_errors) >= 1 and len(rep.sessions) == 1


def test_two_gloves_interleaved(archetypes):
    left = list(frames_of(archetypes[0], D, 2))
    right = list(frames_of(archetypes[0], N, 2, seed=5))
    mixed = [f for pair in zip(left, right) for f in pair]
    mixed += left[len(right):] + right[len(left):]
    store = SessionStore()
    ingest_stream(encode_frames(mixed), store, "expert", dominant_glove=Glove.LEFT)
    assert len(store.sessions("expert", D)) == 2 and len(store.sessions("expert", N)) == 2
    assert all(s.glove is Glove.RIGHT for s in store.sessions("expert", N))


def test_replay_is_deduplicated(archetypes):
    data = encode_frames(frames_of(archetypes[0], D, 2))
    store = SessionStore()
    ingest_stream(data, store, "expert")
    rep = ingest_stream(data, store, "expert")
    assert len(store) == 2 and rep.duplicates == 2


def battery(levels, glove=Glove.LEFT):
    return [SensorFrame.battery(glove, 1000 * i, v) for i, v in enumerate(levels)]


def test_watchdog_traces():
    assert battery_watchdog(battery([4200, 4100])) == []
    (t,) = battery_watchdog(battery([3710, 3690]))
    assert t.kind is Transition.WARN and t.value_mV == 3690 and t.timestamp_ms == 1000
    kinds = [t.kind for t in battery_watchdog(battery([3690, 3720, 3760, 3690]))]
    assert kinds == [Transition.WARN, Transition.CLEAR, Transition.WARN]
    both = battery([3690]) + battery([3690], Glove.RIGHT)
    assert [t.glove for t in battery_watchdog(both)] == [Glove.LEFT, Glove.RIGHT]


@given(st.lists(st.integers(3500, 4200), max_size=50))
def test_watchdog_alternates(levels):
    kinds = [t.kind for t in battery_watchdog(battery(levels))]
    assert all(a is not b for a, b in zip(kinds, kinds[1:]))
    if kinds:
        assert kinds[0] is Transition.WARN


def test_simulated_drain_warns_once(archetypes):
    cfg = SimulatorConfig(rng_seed=1, battery_drain_mV_per_min=600.0)
    sink = ListSink()
    run_experiment(archetypes[0], D, 8, cfg, sink)
    rep = ingest_stream(encode_frames(sink), SessionStore(), "expert")
    warns = [t for t in rep.transitions if t.kind is Transition.WARN]
    assert len(warns) == 1 and warns[0].value_mV < 3700


def test_sensor_files(tmp_path):
    s = SessionLog(1, "a", D, Glove.LEFT, 0, 100,
                   {3: SensorSeries(np.array([40, 0, 20]), np.array([3, 1, 2]))})
    paths = write_sensor_files(s, tmp_path)
    assert len(paths) == 12
    empty = tmp_path / "a_dominant_s1_S1.tsv"
    assert empty.read_text() == SENSOR_HEADER + "\n"
    lines = (tmp_path / "a_dominant_s1_S3.tsv").read_text().splitlines()
    assert lines[1:] == ["0\tleft\t3\t1", "20\tleft\t3\t2", "40\tleft\t3\t3"]
    glove, series = read_sensor_file(tmp_path / "a_dominant_s1_S3.tsv")
    assert glove is Glove.LEFT and series == SensorSeries(np.array([0, 20, 40]), np.array([1, 2, 3]))


def test_store_on_disk_round_trip(archetypes, tmp_path):
    store = SessionStore(tmp_path / "store")
    ingest_stream(encode_frames(frames_of(archetypes[0], D, 3)), store, "expert")
    manifest = (tmp_path / "store" / "manifest.tsv").read_text().splitlines()
    assert manifest[0] == MANIFEST_HEADER and len(manifest) == 4
    again = SessionStore.open(tmp_path / "store")
    assert again.sessions() == store.sessions()


def test_store_rejects_tampered_manifest(archetypes, tmp_path):
    store = SessionStore(tmp_path)
    ingest_stream(encode_frames(frames_of(archetypes[0], D, 1)), store, "expert")
    m = tmp_path / "manifest.tsv"
    lines = m.read_text().splitlines()
    cols = lines[1].split("\t")
    cols[5] = str(int(cols[5]) + 1)
    m.write_text("\n".join([lines[0], "\t".join(cols)]) + "\n")
    with pytest.raises(StoreError):
        SessionStore.open(tmp_path)
    with pytest.raises(StoreError):
        SessionStore.open(tmp_path / "nowhere")


def test_store_error_carries_partial_report(archetypes, tmp_path):
    (tmp_path / "expert").write_text("not a directory")
    with pytest.raises(StoreError) as info:
        ingest_stream(encode_frames(frames_of(archetypes[0], D, 2)), SessionStore(tmp_path), "expert")
    rep = info.value.report
    assert rep.sessions == [] and rep.readings_decoded > 0


def test_concurrent_matches_sequential(archetypes):
    sources = [encode_frames(frames_of(archetypes[0], h, 3, seed=s)) for h, s in ((D, 1), (N, 2))]
    seq = SessionStore()
    for src in sources:
        ingest_stream(src, seq, "expert")
    par = SessionStore()
    reports = ingest_concurrently(sources, par, "expert")
    assert par.sessions() == seq.sessions()
    assert sum(r.samples_persisted for r in reports) == sum(s.sample_count for s in seq.sessions())


def test_socket_listener(archetypes):
    store, ready, bound, out = SessionStore(), threading.Event(), [], {}
    server = threading.Thread(target=lambda: out.setdefault(
        "reports", serve(store, "expert", Glove.LEFT, connections=2, ready=ready, bound=bound, timeout=20)))
    server.start()
    assert ready.wait(10)
    host, port = bound[0]

    def client(hand, seed):
        with SocketSink(host, port) as sink:
            run_experiment(archetypes[0], hand, 2, SimulatorConfig(rng_seed=seed), sink)

    clients = [threading.Thread(target=client, args=a) for a in ((D, 1), (N, 2))]
    for c in clients:
        c.start()
    for c in clients + [server]:
        c.join(30)
    assert len(out["reports"]) == 2
    assert len(store.sessions("expert", D)) == 2 and len(store.sessions("expert", N)) == 2
    assert all(r.orphans == 0 and not r.decode_errors for r in out["reports"])
