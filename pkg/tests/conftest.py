from typing import Optional, Sequence, Tuple

import numpy as np
import pytest

from app.models.observation import FeatureVector, Observation, PersonTrack
from app.schemas.config import ForestParams, PipelineConfig
from app.schemas.scenario import CameraLayout, LinkLaw, ScenarioSpec, ZoneLayout

DIMENSION = 8


def unit(index: int, dimension: int = DIMENSION) -> np.ndarray:
    vector = np.zeros(dimension)
    vector[index] = 1.0
    return vector


def make_track(
    camera: str,
    t_in: float,
    seq: int = 0,
    features: Optional[Sequence[np.ndarray]] = None,
    label: Optional[str] = None,
    n_obs: int = 3,
    step: float = 1.0,
    start: Tuple[float, float] = (0.1, 0.5),
    end: Tuple[float, float] = (0.9, 0.5),
) -> PersonTrack:
    """Трек из n_obs наблюдений с шагом step; features - по одному вектору на наблюдение или один на все"""
    if features is None:
        features = [unit(0)]
    if len(features) == 1:
        features = list(features) * n_obs
    n_obs = len(features)
    observations = []
    for k, values in enumerate(features):
        w = k / (n_obs - 1) if n_obs > 1 else 0.0
        position = ((1 - w) * start[0] + w * end[0], (1 - w) * start[1] + w * end[1])
        observations.append(Observation(camera=camera, time=t_in + k * step, position=position,
                                        feature=FeatureVector(values)))
    return PersonTrack(camera=camera, observations=tuple(observations), seq=seq, label=label)


def cluster_features(rng: np.random.Generator, center: int, count: int, noise: float = 0.05) -> list:
    return [np.abs(unit(center) + rng.normal(0.0, noise, DIMENSION)) for _ in range(count)]


@pytest.fixture
def small_forest() -> ForestParams:
    return ForestParams(n_trees=10, max_depth=8)


@pytest.fixture
def fast_config(small_forest) -> PipelineConfig:
    return PipelineConfig(forest=small_forest, initial_window_T=120.0, max_iterations=3)


def two_camera_scenario(**overrides) -> ScenarioSpec:
    """Две камеры, одна связь C1Z2 -> C2Z1 с законом N(30, 3^2)"""
    data = dict(
        cameras=[
            CameraLayout(camera="C1", zones=[ZoneLayout(zone_id=1, centroid=(0.08, 0.5)),
                                             ZoneLayout(zone_id=2, centroid=(0.92, 0.5))]),
            CameraLayout(camera="C2", zones=[ZoneLayout(zone_id=1, centroid=(0.08, 0.5)),
                                             ZoneLayout(zone_id=2, centroid=(0.92, 0.5))]),
        ],
        gt_links=[LinkLaw(source_camera="C1", source_zone=2, dest_camera="C2", dest_zone=1,
                          mu=30.0, sigma=3.0, probability=1.0)],
        identities=40,
        dimension=16,
        noise=0.02,
        distractor_fraction=0.0,
        duration=1200.0,
        link_preference=1.0,
        seed=3,
    )
    data.update(overrides)
    return ScenarioSpec(**data)


@pytest.fixture
def scenario() -> ScenarioSpec:
    return two_camera_scenario()
