import math

import numpy as np
import pytest
from scipy.stats import norm

from app.models.forest import ForestSeries
from app.models.topology import Correspondence, SearchWindow
from app.models.observation import TrackRef
from app.schemas.config import PipelineConfig
from app.services.forest import train_forest_series
from app.services.topology import (
    DEGENERATE_FIT_MESSAGE,
    GatherStats,
    Histogram,
    TopologyException,
    build_histogram,
    connectivity_confidence,
    empirical_bounds,
    filter_reliable,
    fit_gaussian,
    fit_transit,
    gather_correspondences,
    histogram_frame,
    time_bounds,
    update_window,
)
from tests.conftest import make_track, unit


def gaussian_histogram(mu: float, sigma: float, lo: float, hi: float, width: float) -> Histogram:
    edges = np.arange(lo, hi + width / 2, width)
    masses = np.diff(norm.cdf(edges, mu, sigma))
    masses = masses / masses.sum()
    return Histogram(edges=edges, masses=masses, support=1000)


def correspondence(similarity: float) -> Correspondence:
    return Correspondence(
        exit_track=TrackRef("C1", 0.0, 0), matched_track=TrackRef("C2", 10.0, 1),
        similarity=similarity, delta_t=5.0,
    )


class TestGatherCorrespondences:
    def _series(self, gallery, small_forest):
        labeled = [track.as_gallery() for track in gallery]
        return labeled, train_forest_series(labeled, window_T=600.0, hyper=small_forest, node="C2")

    def test_empty_gallery_yields_nothing(self):
        exits = [make_track("C1", 0.0)]
        stats = GatherStats()
        found = gather_correspondences("C1", "C2", exits, [], ForestSeries(node="C2", window_T=600.0),
                                       SearchWindow.one_sided(600.0), stats)
        assert found == []
        assert stats.skipped == 1

    def test_identical_track_in_window_is_matched(self, small_forest):
        exit_track = make_track("C1", 0.0, seq=0, features=[unit(2)])
        gallery, series = self._series([make_track("C2", 40.0, seq=1, features=[unit(2)])], small_forest)
        found = gather_correspondences("C1", "C2", [exit_track], gallery, series, SearchWindow.one_sided(600.0))
        assert len(found) == 1
        assert found[0].similarity == pytest.approx(1.0)
        assert found[0].delta_t == pytest.approx(40.0 - exit_track.exit_time)
        assert found[0].matched_track.seq == 1

    def test_track_outside_window_is_excluded(self, small_forest):
        exit_track = make_track("C1", 0.0, seq=0, features=[unit(2)])
        gallery, series = self._series([
            make_track("C2", 400.0, seq=1, features=[unit(2)]),
            make_track("C2", 30.0, seq=2, features=[unit(5)]),
        ], small_forest)
        stats = GatherStats()
        found = gather_correspondences("C1", "C2", [exit_track], gallery, series, SearchWindow.one_sided(100.0), stats)
        assert [c.matched_track.seq for c in found] == [2]
        assert stats.comparisons == 1

    def test_tracks_that_left_before_the_exit_track_appeared_are_skipped(self, small_forest):
        exit_track = make_track("C1", 100.0, seq=0, features=[unit(2)])
        gallery, series = self._series([
            make_track("C2", 20.0, seq=1, features=[unit(2)]),
            make_track("C2", 90.0, seq=2, features=[unit(4)], n_obs=21),
            make_track("C2", 140.0, seq=3, features=[unit(3)]),
        ], small_forest)
        stats = GatherStats()
        found = gather_correspondences("C1", "C2", [exit_track], gallery, series, SearchWindow.two_sided(600.0), stats)
        assert stats.comparisons == 2
        assert found[0].matched_track.seq in (2, 3)

    def test_every_correspondence_lies_in_window(self, small_forest):
        rng = np.random.default_rng(0)
        exits = [make_track("C1", float(t), seq=i, features=[unit(i % 8)]) for i, t in enumerate(rng.uniform(0, 500, 15))]
        gallery, series = self._series(
            [make_track("C2", float(t), seq=100 + i, features=[unit(i % 8)]) for i, t in enumerate(rng.uniform(0, 600, 30))],
            small_forest,
        )
        window = SearchWindow.one_sided(120.0)
        for c in gather_correspondences("C1", "C2", exits, gallery, series, window):
            assert window.contains(c.delta_t)


def test_filter_reliable_is_strict():
    assert filter_reliable([correspondence(0.7)], 0.7) == []
    assert len(filter_reliable([correspondence(0.71)], 0.7)) == 1
    assert filter_reliable([], 0.7) == []


def test_filter_reliable_keeps_an_ordered_subset():
    rng = np.random.default_rng(5)
    cands = [correspondence(float(s)) for s in rng.uniform(0.0, 1.0, 200)]
    kept = filter_reliable(cands, 0.7)
    assert all(c.similarity > 0.7 for c in kept)
    assert kept == [c for c in cands if c in kept]
    assert len(kept) == sum(c.similarity > 0.7 for c in cands)
    shuffled = [cands[i] for i in rng.permutation(len(cands))]
    assert sorted(c.similarity for c in filter_reliable(shuffled, 0.7)) == sorted(c.similarity for c in kept)


def test_histogram_counts_with_right_closed_bins():
    hist = build_histogram([10.0, 10.0, 20.0], 10.0, 0.0, 30.0)
    np.testing.assert_allclose(hist.masses, [2 / 3, 1 / 3, 0.0])
    assert hist.support == 3


def test_histogram_single_sample_and_discarded_values():
    hist = build_histogram([12.0, -5.0, 99.0], 2.0, 0.0, 30.0)
    assert hist.support == 1
    assert hist.discarded == 2
    assert hist.non_empty == 1
    assert hist.masses.sum() == pytest.approx(1.0)


def test_empty_histogram_has_zero_support():
    hist = build_histogram([], 2.0, 0.0, 30.0)
    assert hist.support == 0
    assert hist.masses.sum() == 0.0


def test_histogram_rejects_bad_arguments():
    with pytest.raises(TopologyException):
        build_histogram([1.0], 0.0, 0.0, 10.0)
    with pytest.raises(TopologyException):
        build_histogram([1.0], 1.0, 10.0, 10.0)


def test_histogram_mean_of_gaussian_samples():
    samples = np.random.default_rng(0).normal(30.0, 5.0, 10_000)
    hist = build_histogram(samples, 1.0, 0.0, 60.0)
    assert float(np.dot(hist.masses, hist.centers)) == pytest.approx(30.0, abs=0.5)


def test_fit_recovers_discretized_gaussian():
    fit = fit_gaussian(gaussian_histogram(30.0, 5.0, 0.0, 60.0, 1.0))
    assert fit.mu == pytest.approx(30.0, abs=0.1)
    assert fit.sigma == pytest.approx(5.0, abs=0.1)
    assert fit.fit_error < 0.01
    assert not fit.degenerate


def test_fit_finds_narrow_peak_over_broad_background():
    rng = np.random.default_rng(4)
    values = np.concatenate([rng.normal(30.0, 3.0, 300), rng.uniform(0.0, 600.0, 300)])
    fit = fit_gaussian(build_histogram(values, 2.0, 0.0, 600.0))
    assert fit.mu == pytest.approx(30.0, abs=1.0)
    assert fit.sigma == pytest.approx(3.0, abs=1.0)


def test_fit_of_uniform_histogram_is_poor():
    values = np.random.default_rng(1).uniform(0.0, 600.0, 5000)
    fit = fit_gaussian(build_histogram(values, 20.0, 0.0, 600.0))
    assert fit.fit_error > 0.5


def test_single_bin_fit_is_degenerate():
    fit = fit_gaussian(build_histogram([5.0, 5.0, 5.0], 2.0, 0.0, 30.0))
    assert fit.degenerate
    assert fit.fit_error == 1.0


def test_confidence_examples():
    assert connectivity_confidence(1e-9, 0.0, 60.0) == pytest.approx(1.0)
    assert connectivity_confidence(6.04, 1.0, 60.0) == 0.0
    assert connectivity_confidence(6.04, 0.1, 60.0) == pytest.approx(0.814, abs=1e-3)


def test_confidence_decreases_in_sigma_and_error():
    rng = np.random.default_rng(2)
    for _ in range(1000):
        s1, s2 = sorted(rng.uniform(0.1, 200.0, 2))
        e1, e2 = sorted(rng.uniform(0.0, 0.99, 2))
        if s1 < s2:
            assert connectivity_confidence(s1, e1, 60.0) > connectivity_confidence(s2, e1, 60.0)
        if e1 < e2:
            assert connectivity_confidence(s1, e1, 60.0) > connectivity_confidence(s1, e2, 60.0)


def test_confidence_rejects_invalid_inputs():
    with pytest.raises(TopologyException):
        connectivity_confidence(0.0, 0.1, 60.0)
    with pytest.raises(TopologyException):
        connectivity_confidence(1.0, 1.5, 60.0)


def test_time_bounds_examples():
    assert time_bounds(0.0, 1.0, 95.0) == pytest.approx((-1.960, 1.960), abs=1e-3)
    assert time_bounds(30.0, 5.0, 95.0) == pytest.approx((20.2, 39.8), abs=0.1)
    assert time_bounds(30.0, 5.0, 0.0) == pytest.approx((30.0, 30.0))


def test_time_bounds_carry_requested_mass():
    T_L, T_U = time_bounds(12.0, 3.0, 80.0)
    assert norm.cdf(T_U, 12.0, 3.0) - norm.cdf(T_L, 12.0, 3.0) == pytest.approx(0.8, abs=1e-6)


def test_empirical_bounds_close_to_parametric_for_gaussian_histogram():
    hist = gaussian_histogram(30.0, 5.0, 0.0, 60.0, 0.5)
    T_L, T_U = empirical_bounds(hist, 95.0)
    assert T_L == pytest.approx(20.2, abs=0.3)
    assert T_U == pytest.approx(39.8, abs=0.3)


def test_update_window_examples():
    assert update_window(0.0, 20.0, 40.0) == pytest.approx(20.0)
    assert update_window(0.5, 20.0, 40.0) == pytest.approx(40.0)
    assert update_window(0.9, 0.0, 10.0) == pytest.approx(100.0)
    with pytest.raises(TopologyException, match=DEGENERATE_FIT_MESSAGE):
        update_window(1.0, 0.0, 10.0)
    with pytest.raises(TopologyException):
        update_window(0.2, 10.0, 10.0)


def test_update_window_does_not_shrink_as_error_grows():
    rng = np.random.default_rng(6)
    for _ in range(200):
        e1, e2 = sorted(rng.uniform(0.0, 0.99, 2))
        T_L = float(rng.uniform(-50.0, 50.0))
        T_U = T_L + float(rng.uniform(0.1, 100.0))
        assert update_window(e1, T_L, T_U) <= update_window(e2, T_L, T_U)


def test_fit_transit_and_histogram_frame():
    cfg = PipelineConfig()
    samples = np.random.default_rng(3).normal(30.0, 4.0, 500)
    distribution = fit_transit("C1Z2", "C2Z1", samples, 0.0, 120.0, cfg)
    assert distribution.mu == pytest.approx(30.0, abs=1.0)
    assert distribution.support == 500
    assert distribution.confidence == pytest.approx(
        math.exp(-distribution.sigma / cfg.sigma_scale) * (1 - distribution.fit_error)
    )

    frame = histogram_frame(distribution)
    bins = frame[frame["row"] == "bin"]
    summary = frame[frame["row"] == "summary"].iloc[0]
    assert len(bins) == len(distribution.masses)
    assert bins["mass"].sum() == pytest.approx(1.0)
    # fitted_value - та же кривая, по которой считается ошибка аппроксимации
    mass, fitted = bins["mass"].to_numpy(float), bins["fitted_value"].to_numpy(float)
    r2 = 1.0 - np.sum((mass - fitted) ** 2) / np.sum((mass - mass.mean()) ** 2)
    assert 1.0 - r2 == pytest.approx(distribution.fit_error, abs=1e-9)
    assert distribution.amplitude is not None
    assert summary["mu"] == pytest.approx(distribution.mu)
