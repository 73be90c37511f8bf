import numpy as np
import pytest

from evkit.model import (Event, EventStream, Polarity, SensorGeometry,
                         batch_events, validate_stream)

G = SensorGeometry(1280, 720)


def stream_of(ts, geometry=G, x=0, y=0):
    n = len(ts)
    return EventStream(geometry, np.array(ts), np.full(n, x), np.full(n, y),
                       np.zeros(n, np.uint8))


class TestValidate:
    def test_non_monotonic(self):
        s = stream_of([5, 3])
        violations = validate_stream(s)
        assert any("non-monotonic at index 1" in v for v in violations)

    def test_x_out_of_range(self):
        s = EventStream(G, [0], [1280], [0], [1])
        violations = validate_stream(s)
        assert any("x out of range" in v for v in violations)

    def test_y_out_of_range(self):
        s = EventStream(G, [0], [0], [720], [1])
        assert any("y out of range" in v for v in validate_stream(s))

    def test_empty_is_valid(self):
        assert validate_stream(EventStream.empty(G)) == []

    def test_valid_stream(self):
        s = EventStream(G, [0, 5, 5, 9], [0, 1, 2, 3], [0, 0, 0, 0], [1, 0, 1, 0])
        assert validate_stream(s) == []


class TestGeometry:
    def test_default_profile(self):
        g = SensorGeometry()
        assert (g.width, g.height) == (1280, 720)

    @pytest.mark.parametrize("w,h", [(0, 10), (10, 0), (-1, 5)])
    def test_rejects_degenerate(self, w, h):
        with pytest.raises(ValueError):
            SensorGeometry(w, h)


class TestEventAccess:
    def test_scalar_view(self):
        s = EventStream(G, [7], [3], [4], [1])
        assert s[0] == Event(3, 4, Polarity.ON, 7)
        assert list(s.events) == [Event(3, 4, Polarity.ON, 7)]

    def test_polarity_sign_convention(self):
        assert Polarity.ON.sign == 1
        assert Polarity.OFF.sign == -1

    def test_columns_are_frozen(self):
        s = stream_of([1, 2])
        with pytest.raises(ValueError):
            s.t[0] = 5


class TestBatching:
    def test_example_partition(self):
        s = stream_of([0, 10_000, 25_000])
        batches = batch_events(s, 20_000, origin_us=0)
        assert len(batches) == 2
        assert batches[0].events.t.tolist() == [0, 10_000]
        assert batches[1].events.t.tolist() == [25_000]
        assert (batches[0].window_start_us, batches[0].window_end_us) == (0, 20_000)
        assert (batches[1].window_start_us, batches[1].window_end_us) == (20_000, 40_000)

    def test_empty_stream(self):
        assert batch_events(EventStream.empty(G), 1000) == []

    def test_uniform_events_equal_batches(self):
        # brute-force partition oracle: floor((t - origin)/window)
        ts = np.arange(100_000)
        s = stream_of(ts.tolist())
        batches = batch_events(s, 25_000, origin_us=0)
        oracle = {}
        for t in ts.tolist():
            oracle.setdefault(t // 25_000, []).append(t)
        assert len(batches) == len(oracle) == 4
        counts = [len(b.events) for b in batches]
        assert max(counts) - min(counts) <= 1
        for k, b in enumerate(batches):
            assert b.events.t.tolist() == oracle[k]

    def test_concat_reproduces_stream(self, rng):
        ts = np.sort(rng.integers(0, 500_000, size=300))
        s = stream_of(ts.tolist())
        batches = batch_events(s, 7_000)
        merged = np.concatenate([b.events.t for b in batches])
        assert merged.tolist() == ts.tolist()

    def test_every_event_in_exactly_its_window(self, rng):
        ts = np.sort(rng.integers(0, 100_000, size=200))
        s = stream_of(ts.tolist())
        for b in batch_events(s, 9_000, origin_us=500):
            assert np.all(b.events.t >= b.window_start_us)
            assert np.all(b.events.t < b.window_end_us)

    def test_windows_contiguous_including_empty_middles(self):
        s = stream_of([0, 95_000])
        batches = batch_events(s, 10_000, origin_us=0)
        assert len(batches) == 10
        assert [len(b.events) for b in batches] == [1] + [0] * 8 + [1]
        for prev, cur in zip(batches, batches[1:]):
            assert cur.window_start_us == prev.window_end_us

    def test_origin_after_first_event(self):
        # alignment phase only: windows extend backward to cover all events
        s = stream_of([0, 30_000])
        batches = batch_events(s, 20_000, origin_us=10_000)
        assert batches[0].window_start_us == -10_000
        assert sum(len(b.events) for b in batches) == 2

    def test_zero_window_rejected(self):
        with pytest.raises(ValueError):
            batch_events(stream_of([0]), 0)

    def test_deterministic(self, rng):
        ts = np.sort(rng.integers(0, 50_000, size=100))
        s = stream_of(ts.tolist())
        a = batch_events(s, 5_000)
        b = batch_events(s, 5_000)
        assert [(x.window_start_us, x.window_end_us, x.events.t.tolist()) for x in a] == \
               [(x.window_start_us, x.window_end_us, x.events.t.tolist()) for x in b]
