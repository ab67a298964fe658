import math

import numpy as np
import pytest

from app.models.ground_truth import GroundTruth, GtCorrespondence, GtLink, parametric_distribution
from app.models.observation import TrackRef
from app.models.topology import CAMERA_LEVEL, ZONE_LEVEL, Correspondence, SearchWindow, TopologyEdge, TopologyGraph
from app.models.zone import ENTRY, EXIT, Zone
from app.services.metrics import (
    MetricsException,
    align_zone_graph,
    bhattacharyya_gaussian,
    bhattacharyya_quadrature,
    flat_fit_penalty,
    link_precision_recall,
    reid_accuracy,
    topology_distance,
)
from app.services.simulator import default_scenario


def _ref(camera, seq):
    return TrackRef(camera, float(seq), seq)


def _gt(n_pairs: int = 2) -> GroundTruth:
    correspondences = tuple(
        GtCorrespondence(exit_track=_ref("C1", 2 * i), entry_track=_ref("C2", 2 * i + 1),
                         label=f"p{i:05d}", source="C1Z2", dest="C2Z1")
        for i in range(n_pairs)
    )
    return GroundTruth(correspondences=correspondences, links=(GtLink("C1Z2", "C2Z1", 30.0, 3.0),))


def _pred(exit_ref, matched_ref):
    return Correspondence(exit_track=exit_ref, matched_track=matched_ref, similarity=0.9, delta_t=1.0)


def _graph(links, level=ZONE_LEVEL):
    edges = [
        TopologyEdge(source=s, dest=d, window=SearchWindow.one_sided(600.0),
                     distribution=parametric_distribution(s, d, mu, sigma), valid=True)
        for s, d, mu, sigma in links
    ]
    nodes = sorted({n for s, d, _, _ in links for n in (s, d)})
    return TopologyGraph(level=level, nodes=tuple(nodes), edges=tuple(edges))


def test_reid_accuracy_examples():
    gt = _gt()
    perfect = [_pred(c.exit_track, c.entry_track) for c in gt.correspondences]
    assert reid_accuracy(perfect, gt) == 1.0
    assert reid_accuracy([], gt) == 0.0
    assert reid_accuracy([perfect[0]] * 3, gt) == 0.5


def test_reid_accuracy_requires_ground_truth():
    with pytest.raises(MetricsException, match="no ground truth"):
        reid_accuracy([], GroundTruth(correspondences=(), links=()))


@pytest.mark.parametrize("g1, g2, expected", [
    ((5.0, 2.0), (5.0, 2.0), 0.0),
    ((0.0, 1.0), (1.0, 1.0), 0.125),
    ((0.0, 1.0), (0.0, 2.0), 0.5 * math.log(5 / 4)),
])
def test_bhattacharyya_closed_form(g1, g2, expected):
    assert bhattacharyya_gaussian(g1, g2) == pytest.approx(expected, abs=1e-12)
    assert bhattacharyya_quadrature(g1, g2) == pytest.approx(expected, abs=1e-6)


def test_bhattacharyya_closed_form_agrees_with_quadrature_on_random_pairs():
    rng = np.random.default_rng(7)
    for _ in range(100):
        g1 = (float(rng.uniform(20.0, 40.0)), float(rng.uniform(2.0, 15.0)))
        g2 = (float(rng.uniform(20.0, 40.0)), float(rng.uniform(2.0, 15.0)))
        assert bhattacharyya_gaussian(g1, g2) == pytest.approx(bhattacharyya_quadrature(g1, g2), abs=1e-6)


def test_bhattacharyya_rejects_non_positive_sigma():
    with pytest.raises(MetricsException):
        bhattacharyya_gaussian((0.0, 0.0), (0.0, 1.0))


def test_topology_distance_examples():
    gt = _graph([("C1Z2", "C2Z1", 30.0, 4.0), ("C2Z2", "C3Z1", 20.0, 4.0)])
    assert topology_distance(gt, gt).penalized == pytest.approx(0.0)

    # сдвиг mu на одну sigma: 0.25 * 16 / 32 = 0.125 на связь, 0.0625 в среднем по двум
    shifted = _graph([("C1Z2", "C2Z1", 30.0, 4.0), ("C2Z2", "C3Z1", 24.0, 4.0)])
    distance = topology_distance(shifted, gt)
    assert distance.matched == pytest.approx(0.0625)
    assert distance.penalized == pytest.approx(0.0625)
    assert distance.missing_links == 0


def test_topology_distance_penalizes_missing_links():
    gt = _graph([("C1Z2", "C2Z1", 30.0, 4.0)])
    empty = TopologyGraph(level=ZONE_LEVEL, nodes=())
    distance = topology_distance(empty, gt, flat_sigma=600.0)
    assert distance.matched is None
    assert distance.missing_links == 1
    assert distance.penalized == pytest.approx(flat_fit_penalty(4.0, 600.0))
    assert topology_distance(empty, gt, penalty=2.5).penalized == 2.5


def test_link_precision_recall_examples():
    links = [(link.source, link.dest, link.mu, link.sigma) for link in default_scenario().gt_links]
    gt = _graph(links)
    assert link_precision_recall(gt, gt) == (1.0, 1.0)
    assert link_precision_recall(TopologyGraph(level=ZONE_LEVEL, nodes=()), gt) == (1.0, 0.0)
    extra = _graph(links + [("C1Z2", "C9Z1", 50.0, 5.0)])
    precision, recall = link_precision_recall(extra, gt)
    assert precision == pytest.approx(14 / 15)
    assert recall == 1.0


def test_camera_level_comparison_uses_camera_pairs():
    gt = _gt().camera_topology()
    assert gt.level == CAMERA_LEVEL
    assert gt.valid_keys() == {("C1", "C2")}


def test_align_zone_graph_renames_learned_zones():
    cov = ((0.001, 0.0), (0.0, 0.001))
    truth_zones = (
        Zone("C1", 2, EXIT, (0.92, 0.5), cov), Zone("C1", 2, ENTRY, (0.92, 0.5), cov),
        Zone("C2", 1, ENTRY, (0.08, 0.5), cov), Zone("C2", 1, EXIT, (0.08, 0.5), cov),
    )
    truth = TopologyGraph(
        level=ZONE_LEVEL, nodes=("C1Z2", "C2Z1"), zones=truth_zones,
        edges=(TopologyEdge("C1Z2", "C2Z1", SearchWindow.one_sided(600.0),
                            parametric_distribution("C1Z2", "C2Z1", 30.0, 3.0), True),),
    )
    learned_zones = (Zone("C1", 1, EXIT, (0.9, 0.51), cov), Zone("C2", 1, ENTRY, (0.1, 0.49), cov))
    inferred = TopologyGraph(
        level=ZONE_LEVEL, nodes=("C1Z1", "C2Z1"), zones=learned_zones,
        edges=(TopologyEdge("C1Z1", "C2Z1", SearchWindow.one_sided(600.0),
                            parametric_distribution("C1Z1", "C2Z1", 31.0, 3.0), True),),
    )
    aligned = align_zone_graph(inferred, truth)
    assert aligned.valid_keys() == {("C1Z2", "C2Z1")}
    assert link_precision_recall(aligned, truth) == (1.0, 1.0)
