import numpy as np
import pytest

from evkit.freqmap import (FLICKER_WINDOW_US, FreqMapConfig, FreqState,
                           FrequencyMap, PixelTransitionState, Transition,
                           colormap_lut, compute_freq_map, estimate_frequency,
                           export_map_csv, freq_histogram, merge_freq_maps,
                           render_freq_map, stream_freq_maps, update_pixel_state)
from evkit.model import (Event, EventBatch, EventStream, Polarity,
                         SensorGeometry, batch_events)
from evkit.synth import Rect, synth_flicker

from conftest import random_stream

G = SensorGeometry(16, 12)


def make_batch(stream):
    t0 = int(stream.t[0]) if len(stream) else 0
    t1 = int(stream.t[-1]) + 1 if len(stream) else 1
    return EventBatch(t0, t1, stream)


class TestPixelState:
    def test_on_off_trace(self):
        cfg = FreqMapConfig()
        st = PixelTransitionState()
        events = [Event(0, 0, Polarity.ON, 0), Event(0, 0, Polarity.OFF, 5000),
                  Event(0, 0, Polarity.ON, 10_000), Event(0, 0, Polarity.OFF, 15_000)]
        intervals = [st.update(e, cfg) for e in events]
        assert intervals == [None, None, None, 10_000]
        assert st.intervals == [10_000]
        assert st.last_transition_t == 15_000

    def test_all_on_no_transitions(self):
        cfg = FreqMapConfig()
        st = PixelTransitionState()
        for t in (0, 100, 200):
            assert st.update(Event(0, 0, Polarity.ON, t), cfg) is None
        assert st.intervals == []

    def test_40hz_alternating_intervals(self):
        cfg = FreqMapConfig()
        st = PixelTransitionState()
        out = []
        # 40 Hz square wave: edges every 12.5 ms
        for k in range(8):
            st, iv = update_pixel_state(st, Event(0, 0, Polarity.ON, k * 25_000), cfg)
            out.append(iv)
            st, iv = update_pixel_state(st, Event(0, 0, Polarity.OFF, k * 25_000 + 12_500), cfg)
            out.append(iv)
        produced = [iv for iv in out if iv is not None]
        assert produced == [25_000] * 7

    def test_off_on_direction(self):
        cfg = FreqMapConfig(transition=Transition.OFF_TO_ON)
        st = PixelTransitionState()
        st.update(Event(0, 0, Polarity.OFF, 0), cfg)
        st.update(Event(0, 0, Polarity.ON, 1000), cfg)
        st.update(Event(0, 0, Polarity.OFF, 2000), cfg)
        assert st.update(Event(0, 0, Polarity.ON, 3000), cfg) == 2000


class TestEstimate:
    def test_uniform_intervals(self):
        assert estimate_frequency([10_000, 10_000, 10_000]) == pytest.approx(100.0)

    def test_empty_unestimated(self):
        assert np.isnan(estimate_frequency([]))

    def test_below_min_intervals(self):
        assert np.isnan(estimate_frequency([10_000]))
        cfg = FreqMapConfig(min_intervals=1)
        assert estimate_frequency([10_000], cfg) == pytest.approx(100.0)

    def test_mean_and_median_agree_here(self):
        for estimator in ("mean", "median"):
            cfg = FreqMapConfig(estimator=estimator)
            assert estimate_frequency([9000, 11_000, 10_000], cfg) == pytest.approx(100.0)

    def test_out_of_range_unestimated_not_clamped(self):
        cfg = FreqMapConfig(f_min_hz=1.0, f_max_hz=5000.0)
        assert np.isnan(estimate_frequency([50, 50], cfg))       # 20 kHz
        assert np.isnan(estimate_frequency([2_000_000] * 3, cfg))  # 0.5 Hz

    def test_config_validation(self):
        with pytest.raises(ValueError):
            FreqMapConfig(window_us=500)
        with pytest.raises(ValueError):
            FreqMapConfig(f_min_hz=10.0, f_max_hz=5.0)
        with pytest.raises(ValueError):
            FreqMapConfig(estimator="mode")


class TestComputeMap:
    def test_empty_batch_all_unestimated(self):
        fmap = compute_freq_map(make_batch(EventStream.empty(G)), G)
        assert fmap.n_estimated == 0

    def test_flicker_region_estimated_others_not(self):
        region = Rect(2, 2, 6, 5)
        s = synth_flicker(G, region, 100.0, 50_000)
        fmap = compute_freq_map(make_batch(s), G)
        inside = np.zeros((G.height, G.width), bool)
        inside[2:7, 2:8] = True
        assert np.all(fmap.estimated == inside)
        np.testing.assert_allclose(fmap.values[inside], 100.0, rtol=1e-6)

    def test_25hz_via_streaming_windows(self):
        # a 50 ms window cannot hold two 40 ms spaced transitions, so the
        # carried state supplies the previous transition
        region = Rect(0, 0, 4, 4)
        s = synth_flicker(G, region, 25.0, 1_000_000)
        cfg = FreqMapConfig(window_us=FLICKER_WINDOW_US, min_intervals=1)
        maps = [m for _, m in stream_freq_maps(s, cfg)]
        merged = merge_freq_maps(maps)
        inside = np.zeros((G.height, G.width), bool)
        inside[0:4, 0:4] = True
        assert np.all(merged.estimated == inside)
        np.testing.assert_allclose(merged.values[inside], 25.0, rtol=0.02)

    def test_two_regions_separate(self):
        a = synth_flicker(G, Rect(0, 0, 4, 4), 40.0, 500_000)
        b = synth_flicker(G, Rect(8, 6, 4, 4), 100.0, 500_000)
        s = EventStream.from_arrays(
            G, np.concatenate([a.t, b.t]), np.concatenate([a.x, b.x]),
            np.concatenate([a.y, b.y]), np.concatenate([a.p, b.p]),
            canonical_sort=True)
        cfg = FreqMapConfig(window_us=50_000, min_intervals=1)
        merged = merge_freq_maps(m for _, m in stream_freq_maps(s, cfg))
        np.testing.assert_allclose(merged.values[0:4, 0:4], 40.0, rtol=0.02)
        np.testing.assert_allclose(merged.values[6:10, 8:12], 100.0, rtol=0.02)
        outside = ~np.isnan(merged.values)
        assert outside.sum() == 32

    def test_vectorized_matches_scalar_reference(self, rng):
        # the batch path must agree with the per-event scalar state machine
        for trial in range(10):
            s = random_stream(rng, n_events=200, width=5, height=4, t_max=300_000)
            for transition in (Transition.ON_TO_OFF, Transition.OFF_TO_ON):
                cfg = FreqMapConfig(transition=transition, min_intervals=1,
                                    f_min_hz=1.0, f_max_hz=5000.0)
                fmap = compute_freq_map(make_batch(s), s.geometry, cfg)
                states = {}
                for e in s:
                    key = (e.x, e.y)
                    states.setdefault(key, PixelTransitionState()).update(e, cfg)
                expect = np.full((s.geometry.height, s.geometry.width), np.nan)
                for (x, y), st in states.items():
                    expect[y, x] = estimate_frequency(st.intervals, cfg)
                np.testing.assert_array_equal(np.isnan(fmap.values), np.isnan(expect))
                np.testing.assert_allclose(fmap.values[~np.isnan(expect)],
                                           expect[~np.isnan(expect)])

    def test_carry_state_matches_single_batch(self, rng):
        s = random_stream(rng, n_events=300, width=4, height=4, t_max=400_000)
        cfg = FreqMapConfig(window_us=100_000, min_intervals=1)
        state = FreqState(s.geometry)
        per_pixel_intervals = {}
        for batch in batch_events(s, cfg.window_us):
            from evkit.freqmap import _batch_intervals
            pid, iv = _batch_intervals(batch.events, cfg, state)
            for g, v in zip(pid.tolist(), iv.tolist()):
                per_pixel_intervals.setdefault(g, []).append(v)
        # scalar oracle over the whole stream
        states = {}
        for e in s:
            states.setdefault(e.y * s.geometry.width + e.x,
                              PixelTransitionState()).update(e, cfg)
        for g, st in states.items():
            assert per_pixel_intervals.get(g, []) == st.intervals

    def test_translation_invariance(self):
        s = synth_flicker(G, Rect(0, 0, 3, 3), 85.0, 100_000)
        shifted = EventStream(G, s.t + 123_456, s.x, s.y, s.p)
        a = compute_freq_map(make_batch(s), G)
        b = compute_freq_map(make_batch(shifted), G)
        np.testing.assert_array_equal(a.values, b.values)

    def test_on_off_equals_off_on_for_symmetric_square(self):
        s = synth_flicker(G, Rect(0, 0, 3, 3), 50.0, 500_000)
        on_off = compute_freq_map(
            make_batch(s), G, FreqMapConfig(window_us=500_000))
        off_on = compute_freq_map(
            make_batch(s), G, FreqMapConfig(window_us=500_000,
                                            transition=Transition.OFF_TO_ON))
        est = on_off.estimated
        np.testing.assert_allclose(on_off.values[est], off_on.values[est])

    def test_jitter_robustness_mean(self):
        # +-5% of period jitter must stay within 7% estimate error
        period = 10_000
        s = synth_flicker(G, Rect(0, 0, 4, 4), 100.0, 1_000_000,
                          jitter_us=period // 20, seed=3)
        cfg = FreqMapConfig(window_us=1_000_000, estimator="mean")
        fmap = compute_freq_map(make_batch(s), G, cfg)
        est = fmap.values[fmap.estimated]
        assert len(est) == 16
        assert np.all(np.abs(est - 100.0) / 100.0 < 0.07)


class TestRender:
    def test_all_unestimated_grey(self):
        fmap = FrequencyMap(G, np.full((G.height, G.width), np.nan))
        img = render_freq_map(fmap, legend=False)
        assert img.shape == (G.height, G.width, 3)
        assert np.all(img == 128)

    def test_endpoint_colors(self):
        cfg = FreqMapConfig(f_min_hz=10.0, f_max_hz=100.0)
        vals = np.full((G.height, G.width), np.nan)
        vals[0, 0] = 10.0
        vals[0, 1] = 100.0
        img = render_freq_map(FrequencyMap(G, vals), cfg, "turbo", legend=False)
        lut = colormap_lut("turbo")
        assert img[0, 0].tolist() == lut[0].tolist()
        assert img[0, 1].tolist() == lut[-1].tolist()

    def test_legend_appended(self):
        fmap = FrequencyMap(G, np.full((G.height, G.width), np.nan))
        img = render_freq_map(fmap)
        assert img.shape[1] > G.width
        assert img.shape[0] == G.height

    def test_hsv_colormap_valid(self):
        lut = colormap_lut("hsv")
        assert lut.shape == (256, 3)
        assert lut[0].tolist() == [255, 0, 0]

    def test_narrow_band_renders_contiguous_hues(self):
        cfg = FreqMapConfig(f_min_hz=1.0, f_max_hz=100.0)
        vals = np.full((G.height, G.width), np.nan)
        vals[2:6, 2:6] = np.linspace(44.0, 46.0, 16).reshape(4, 4)
        img = render_freq_map(FrequencyMap(G, vals), cfg, legend=False)
        lut = colormap_lut("turbo").tolist()
        patch = img[2:6, 2:6].reshape(-1, 3)
        idx = sorted({lut.index(px.tolist()) for px in patch})
        assert len(idx) <= 6
        assert idx[-1] - idx[0] <= 6  # one contiguous run of adjacent hues


class TestHistogram:
    def test_dominant_bin(self):
        vals = np.full((G.height, G.width), np.nan)
        vals[:5, :] = 25.0  # 5 rows x 16 cols = 80 pixels at 25 Hz
        fmap = FrequencyMap(G, vals)
        hist = freq_histogram(fmap, 10, 0.0, 50.0)
        lo, hi, count = hist.dominant
        assert lo <= 25.0 <= hi
        assert count == 80

    def test_empty_histogram(self):
        fmap = FrequencyMap(G, np.full((G.height, G.width), np.nan))
        hist = freq_histogram(fmap, 10)
        assert hist.dominant is None
        assert hist.rows() == []

    def test_two_modes(self):
        vals = np.full((G.height, G.width), np.nan)
        vals[0:3, :] = 40.0
        vals[8:11, :] = 100.0
        hist = freq_histogram(FrequencyMap(G, vals), 20, 0.0, 200.0)
        counts = hist.counts
        populated = np.nonzero(counts)[0]
        assert len(populated) == 2
        assert counts[populated[0]] == counts[populated[1]] == 48


class TestMergeExport:
    def test_merge_latest_wins(self):
        a = np.full((G.height, G.width), np.nan)
        b = np.full((G.height, G.width), np.nan)
        a[0, 0] = 10.0
        a[0, 1] = 20.0
        b[0, 1] = 30.0
        merged = merge_freq_maps([FrequencyMap(G, a), FrequencyMap(G, b)])
        assert merged.values[0, 0] == 10.0
        assert merged.values[0, 1] == 30.0

    def test_export_omits_unestimated(self):
        vals = np.full((G.height, G.width), np.nan)
        vals[3, 7] = 42.5
        text = export_map_csv(FrequencyMap(G, vals))
        assert text == "7,3,42.5\n"
