import numpy as np
import pytest

from app.schemas.config import PipelineConfig
from app.services.baselines import (
    STAGE_EXHAUSTIVE,
    event_correlation_baseline,
    exhaustive_baseline,
    exhaustive_topology,
)
from app.services.topology import fit_transit
from tests.conftest import make_track, unit
from tests.test_pipeline import DIM, linked_stream


class TestExhaustiveBaseline:
    def test_best_candidate_is_chosen(self, fast_config):
        stream = [
            make_track("C1", 0.0, seq=0, features=[unit(2)]),
            make_track("C2", 10.0, seq=1, features=[unit(2)]),
            make_track("C2", 20.0, seq=2, features=[unit(5)]),
        ]
        result = exhaustive_baseline(stream, fast_config)
        assert result.stage == STAGE_EXHAUSTIVE
        by_exit = {c.exit_track.seq: c for c in result.correspondences}
        assert by_exit[0].matched_track.seq == 1
        assert by_exit[0].similarity == pytest.approx(1.0)
        assert by_exit[0].delta_t == pytest.approx(8.0)
        # два кандидата для C1 и по одному для каждого трека C2
        assert result.comparisons == 4

    def test_tie_goes_to_smaller_sequence_number(self, fast_config):
        stream = [
            make_track("C1", 0.0, seq=0, features=[unit(1)]),
            make_track("C2", 15.0, seq=1, features=[unit(1)]),
            make_track("C2", 30.0, seq=2, features=[unit(1)]),
        ]
        result = exhaustive_baseline(stream, fast_config)
        by_exit = {c.exit_track.seq: c for c in result.correspondences}
        assert by_exit[0].matched_track.seq == 1

    def test_candidates_outside_window_and_same_camera_are_ignored(self, fast_config):
        stream = [
            make_track("C1", 0.0, seq=0, features=[unit(3)]),
            make_track("C1", 10.0, seq=1, features=[unit(3)]),
            make_track("C2", 500.0, seq=2, features=[unit(3)]),
        ]
        result = exhaustive_baseline(stream, fast_config)
        assert result.correspondences == []
        assert result.comparisons == 0

    def test_empty_stream(self, fast_config):
        result = exhaustive_baseline([], fast_config)
        assert result.correspondences == []
        assert result.comparisons == 0


def test_exhaustive_topology_finds_the_link(fast_config):
    stream, _ = linked_stream()
    graph = exhaustive_topology(stream, fast_config)
    assert ("C1Z1", "C2Z1") in graph.valid_keys()
    assert graph.edge("C1Z1", "C2Z1").distribution.mu == pytest.approx(30.0, abs=2.0)


def test_event_correlation_matches_fit_of_true_transits():
    cfg = PipelineConfig(initial_window_T=120.0)
    transits = [28.5, 29.3, 30.4, 30.6, 31.2, 32.5, 29.7, 30.9]
    stream = []
    for i, dt in enumerate(transits):
        t = 1000.0 * i
        stream.append(make_track("C1", t, seq=2 * i, features=[unit(0)]))
        stream.append(make_track("C2", t + 2.0 + dt, seq=2 * i + 1, features=[unit(1)]))

    graph = event_correlation_baseline(stream, cfg)
    edge = graph.edge("C1Z1", "C2Z1")
    expected = fit_transit("C1Z1", "C2Z1", transits, 0.0, cfg.initial_window_T, cfg)
    assert edge.distribution.support == expected.support
    assert edge.distribution.masses == pytest.approx(expected.masses)
    assert edge.distribution.mu == pytest.approx(expected.mu)
    assert edge.distribution.sigma == pytest.approx(expected.sigma)
    assert edge.valid == (expected.confidence > cfg.theta_conf)
    assert graph.edge("C2Z1", "C1Z1") is None


def test_event_correlation_on_empty_stream():
    graph = event_correlation_baseline([], PipelineConfig())
    assert graph.edges == ()


def test_distractors_blur_event_correlation_but_not_appearance(fast_config):
    stream, _ = linked_stream()
    rng = np.random.default_rng(8)
    # Посторонние в C2 с дескрипторами, ортогональными всем людям потока
    raw = [(t.camera, t.entry_time, [t.features[0]], t.label) for t in stream]
    raw += [("C2", float(t), [unit(30 + i % 2, DIM)], f"d{i:05d}") for i, t in enumerate(rng.uniform(0.0, 1300.0, 150))]
    raw.sort(key=lambda item: (item[1], item[0]))
    crowded = [make_track(camera, t, seq=seq, features=f, label=label) for seq, (camera, t, f, label) in enumerate(raw)]

    by_events = event_correlation_baseline(crowded, fast_config).edge("C1Z1", "C2Z1")
    by_appearance = exhaustive_topology(crowded, fast_config).edge("C1Z1", "C2Z1")
    assert by_events.distribution.fit_error > by_appearance.distribution.fit_error
    assert by_appearance.valid
