import numpy as np
import pytest

from evkit.model import EventStream, SensorGeometry


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_stream(rng, n_events=50, width=16, height=12, t_max=100_000):
    """Sorted random stream used by round-trip and filter property tests."""
    geometry = SensorGeometry(width, height)
    t = np.sort(rng.integers(0, t_max, size=n_events))
    x = rng.integers(0, width, size=n_events)
    y = rng.integers(0, height, size=n_events)
    p = rng.integers(0, 2, size=n_events)
    return EventStream(geometry, t, x, y, p)


def assert_subsequence(filtered: EventStream, original: EventStream):
    """Filter outputs must be order-preserving subsets of their input."""
    rows_in = set(map(tuple, np.stack(
        [original.t, original.x, original.y, original.p.astype(np.int64)], axis=1).tolist()))
    rows_out = np.stack(
        [filtered.t, filtered.x, filtered.y, filtered.p.astype(np.int64)], axis=1).tolist()
    for row in rows_out:
        assert tuple(row) in rows_in
    assert np.all(np.diff(filtered.t) >= 0)
