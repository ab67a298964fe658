import numpy as np
import pytest

from app.models.zone import ENTRY, EXIT, Zone
from app.services.zones import ZoneLearningException, assign_zone, learn_camera_zones, learn_zones, route_tracks
from tests.conftest import make_track


def test_identical_points_give_one_zone():
    zones = learn_camera_zones("C1", EXIT, [(0.4, 0.6)] * 30, k_max=5)
    assert len(zones) == 1
    assert zones[0].centroid == pytest.approx((0.4, 0.6))


def test_two_separated_clouds_give_two_zones():
    rng = np.random.default_rng(0)
    spread = 0.02
    left = rng.normal((0.2, 0.5), spread, size=(100, 2))
    right = rng.normal((0.2 + 10 * spread, 0.5), spread, size=(100, 2))
    zones = learn_camera_zones("C1", ENTRY, np.vstack([left, right]), k_max=5, seed=1)
    assert len(zones) == 2
    assert [z.zone_id for z in zones] == [1, 2]
    assert zones[0].centroid == pytest.approx(tuple(left.mean(axis=0)), abs=0.02)
    assert zones[1].centroid == pytest.approx(tuple(right.mean(axis=0)), abs=0.02)


def test_k_max_one_forces_single_zone():
    rng = np.random.default_rng(1)
    points = np.vstack([rng.normal((0.1, 0.5), 0.02, (50, 2)), rng.normal((0.9, 0.5), 0.02, (50, 2))])
    assert len(learn_camera_zones("C1", EXIT, points, k_max=1)) == 1


def test_no_points_is_an_error():
    with pytest.raises(ZoneLearningException):
        learn_camera_zones("C1", EXIT, [])


def test_learn_zones_covers_both_kinds_per_camera():
    stream = [
        make_track("C1", 10.0 * i, seq=i, start=(0.1, 0.5), end=(0.9, 0.5)) for i in range(10)
    ] + [
        make_track("C2", 10.0 * i, seq=10 + i, start=(0.5, 0.1), end=(0.5, 0.9)) for i in range(10)
    ]
    zones = learn_zones(stream, k_max=3)
    kinds = sorted((z.camera, z.kind) for z in zones)
    assert kinds == [("C1", ENTRY), ("C1", EXIT), ("C2", ENTRY), ("C2", EXIT)]
    routes = route_tracks(stream, zones)
    assert routes[0] == ("C1Z1", "C1Z1")
    assert routes[10] == ("C2Z1", "C2Z1")


def _zone(zone_id, centroid, kind=EXIT):
    return Zone(camera="C1", zone_id=zone_id, kind=kind, centroid=centroid, spread=((0.01, 0.0), (0.0, 0.01)))


def test_assign_zone_rules():
    single = [_zone(1, (0.5, 0.5))]
    assert assign_zone(single, (0.0, 0.0), EXIT).zone_id == 1

    zones = [_zone(1, (0.2, 0.5)), _zone(2, (0.8, 0.5))]
    assert assign_zone(zones, (0.8, 0.5), EXIT).zone_id == 2
    assert assign_zone(zones, (0.5, 0.5), EXIT).zone_id == 1


def test_assign_zone_without_matching_kind():
    with pytest.raises(ZoneLearningException):
        assign_zone([_zone(1, (0.5, 0.5))], (0.5, 0.5), ENTRY)


def test_single_point_gives_one_zone_with_floor_covariance():
    zones = learn_camera_zones("C2", ENTRY, [(0.3, 0.7)])
    assert len(zones) == 1
    assert zones[0].centroid == pytest.approx((0.3, 0.7))
    assert np.all(np.linalg.eigvalsh(zones[0].covariance) > 0)


def test_camera_with_one_track_is_learned():
    stream = [
        make_track("C1", 0.0, seq=0),
        make_track("C1", 50.0, seq=1),
        make_track("C2", 10.0, seq=2, start=(0.5, 0.1), end=(0.5, 0.9)),
    ]
    zones = learn_zones(stream)
    c2 = [z for z in zones if z.camera == "C2"]
    assert sorted(z.kind for z in c2) == [ENTRY, EXIT]
    assert route_tracks(stream, zones)[2] == ("C2Z1", "C2Z1")


@pytest.mark.parametrize("seed", range(5))
def test_small_clouds_are_not_split(seed):
    rng = np.random.default_rng(seed)
    points = np.vstack([rng.normal((0.08, 0.5), 0.03, (15, 2)), rng.normal((0.92, 0.5), 0.03, (15, 2))])
    zones = learn_camera_zones("C1", ENTRY, points, k_max=5, seed=seed)
    assert len(zones) == 2
    assert zones[0].centroid == pytest.approx((0.08, 0.5), abs=0.03)
    assert zones[1].centroid == pytest.approx((0.92, 0.5), abs=0.03)


def test_few_points_limit_the_number_of_zones():
    points = [(0.1, 0.5), (0.1, 0.52), (0.9, 0.5), (0.9, 0.48), (0.5, 0.1)]
    assert len(learn_camera_zones("C1", EXIT, points, k_max=5)) == 1
