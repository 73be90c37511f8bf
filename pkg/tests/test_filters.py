import numpy as np
import pytest

from evkit.filters import (ErcConfig, FlickerBand, StcConfig, anti_flicker,
                           erc_decimate, refractory_filter, stc_filter)
from evkit.model import EventStream, SensorGeometry
from evkit.synth import Rect, synth_flicker

from conftest import assert_subsequence, random_stream

G = SensorGeometry(16, 16)


def one_pixel(ts, ps, geometry=G):
    n = len(ts)
    return EventStream(geometry, ts, np.zeros(n, int), np.zeros(n, int), ps)


class TestStc:
    def test_keeps_second_of_burst(self):
        s = one_pixel([0, 3000, 4000], [1, 1, 1])
        out = stc_filter(s, StcConfig(5000, keep_trail=False))
        assert out.t.tolist() == [3000]

    def test_keep_trail_variant(self):
        s = one_pixel([0, 3000, 4000], [1, 1, 1])
        out = stc_filter(s, StcConfig(5000, keep_trail=True))
        assert out.t.tolist() == [3000, 4000]

    def test_isolated_event_dropped(self):
        s = one_pixel([100], [1])
        assert len(stc_filter(s, StcConfig(5000))) == 0

    def test_gap_beyond_window_splits_burst(self):
        s = one_pixel([0, 6000, 7000], [1, 1, 1])
        out = stc_filter(s, StcConfig(5000))
        assert out.t.tolist() == [7000]  # [0] isolated; [6000,7000] burst

    def test_polarity_change_terminates_burst(self):
        s = one_pixel([0, 1000, 2000, 3000], [1, 1, 0, 0])
        out = stc_filter(s, StcConfig(5000))
        assert out.t.tolist() == [1000, 3000]

    def test_pixels_independent(self):
        s = EventStream(G, [0, 500, 1000], [0, 1, 0], [0, 0, 0], [1, 1, 1])
        out = stc_filter(s, StcConfig(5000))
        assert out.t.tolist() == [1000]
        assert out.x.tolist() == [0]

    def test_contracting(self, rng):
        for _ in range(20):
            s = random_stream(rng, n_events=120, width=4, height=4, t_max=20_000)
            cfg = StcConfig(2000, keep_trail=bool(rng.integers(2)))
            once = stc_filter(s, cfg)
            twice = stc_filter(once, cfg)
            assert len(twice) <= len(once) <= len(s)
            assert_subsequence(once, s)

    def test_rejects_zero_window(self):
        with pytest.raises(ValueError):
            StcConfig(0)


class TestRefractory:
    def test_rule_trace(self):
        s = one_pixel([0, 50, 200], [1, 1, 1])
        out = refractory_filter(s, 100)
        assert out.t.tolist() == [0, 200]

    def test_zero_dead_time_is_identity(self):
        s = one_pixel([0, 0, 10], [1, 0, 1])
        out = refractory_filter(s, 0)
        assert out.t.tolist() == [0, 0, 10]

    def test_dead_time_beyond_half_period_keeps_one_polarity(self):
        # 100 Hz flicker alternates ON/OFF every 5000 us
        s = synth_flicker(G, Rect(0, 0, 2, 2), 100.0, 100_000)
        out = refractory_filter(s, 6000)
        assert len(out) > 0
        assert np.all(out.p == out.p[0])

    def test_subsequence_property(self, rng):
        s = random_stream(rng, n_events=150, width=3, height=3, t_max=5_000)
        out = refractory_filter(s, 300)
        assert_subsequence(out, s)

    def test_per_pixel_gap_invariant(self, rng):
        s = random_stream(rng, n_events=200, width=3, height=3, t_max=10_000)
        out = refractory_filter(s, 500)
        for pid in np.unique(out.pixel_ids):
            ts = out.t[out.pixel_ids == pid]
            assert np.all(np.diff(ts) >= 500)


class TestErc:
    def test_stride_decimation_every_second(self):
        s = one_pixel(list(range(1000)), [1] * 1000)
        out = erc_decimate(s, ErcConfig(500_000, 1000))  # 500 keps, 1 ms window
        assert len(out) == 500
        assert out.t.tolist() == list(range(0, 1000, 2))

    def test_under_cap_identity(self):
        s = one_pixel([0, 100, 200], [1, 1, 1])
        out = erc_decimate(s, ErcConfig(1_000_000, 1000))
        assert out.t.tolist() == [0, 100, 200]

    def test_output_sorted_and_subsequence(self, rng):
        s = random_stream(rng, n_events=400, width=8, height=8, t_max=4_000)
        out = erc_decimate(s, ErcConfig(50_000, 2_000))
        assert_subsequence(out, s)

    def test_per_pixel_order_preserved(self, rng):
        s = random_stream(rng, n_events=300, width=4, height=4, t_max=3_000)
        out = erc_decimate(s, ErcConfig(80_000, 1_000))
        for pid in np.unique(out.pixel_ids):
            ts = out.t[out.pixel_ids == pid]
            assert np.all(np.diff(ts) >= 0)

    def test_rate_capped_per_window(self, rng):
        s = random_stream(rng, n_events=500, width=8, height=8, t_max=5_000)
        cfg = ErcConfig(100_000, 1_000)  # cap = 100 per 1 ms window
        out = erc_decimate(s, cfg)
        from evkit.model import batch_events
        for b in batch_events(out, 1_000, origin_us=int(s.t[0])):
            assert len(b.events) <= 100


class TestAntiFlicker:
    def test_removes_flicker_keeps_vibration(self):
        g = SensorGeometry(32, 16)
        flicker = synth_flicker(g, Rect(0, 0, 8, 8), 100.0, 400_000)
        vib = synth_flicker(g, Rect(16, 0, 8, 8), 20.0, 400_000)
        t = np.concatenate([flicker.t, vib.t])
        x = np.concatenate([flicker.x, vib.x])
        y = np.concatenate([flicker.y, vib.y])
        p = np.concatenate([flicker.p, vib.p])
        s = EventStream.from_arrays(g, t, x, y, p, canonical_sort=True)
        out = anti_flicker(s, [FlickerBand(95.0, 105.0)], window_us=50_000)
        kept_flicker = int((out.x < 8).sum())
        kept_vib = int((out.x >= 16).sum())
        assert kept_flicker == 0
        assert kept_vib == len(vib)

    def test_no_bands_identity(self):
        s = synth_flicker(G, Rect(0, 0, 2, 2), 50.0, 100_000)
        out = anti_flicker(s, [], window_us=50_000)
        assert len(out) == len(s)

    def test_band_validation(self):
        with pytest.raises(ValueError):
            FlickerBand(50.0, 50.0)

    def test_50hz_harmonic_band(self):
        s = synth_flicker(G, Rect(0, 0, 4, 4), 50.0, 400_000)
        out = anti_flicker(s, [FlickerBand(45.0, 55.0)], window_us=100_000)
        assert len(out) < 0.01 * len(s)


class TestDeterminism:
    def test_filters_pure(self, rng):
        s = random_stream(rng, n_events=250, width=6, height=6, t_max=30_000)
        assert stc_filter(s, StcConfig(1500)).t.tolist() == \
               stc_filter(s, StcConfig(1500)).t.tolist()
        assert refractory_filter(s, 700).t.tolist() == \
               refractory_filter(s, 700).t.tolist()
        assert erc_decimate(s, ErcConfig(9_000, 3_000)).t.tolist() == \
               erc_decimate(s, ErcConfig(9_000, 3_000)).t.tolist()
