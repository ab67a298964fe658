"""
Обучение зон входа/выхода (смесь гауссиан + BIC) и отнесение точек к зонам
"""
import logging
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.stats import multivariate_normal
from sklearn.mixture import GaussianMixture

from app.core.exceptions import ReidTopologyException
from app.models.observation import PersonTrack, Point, tracks_by_camera
from app.models.zone import ENTRY, EXIT, Zone
from app.utils.random import derive_seed

logger = logging.getLogger(__name__)

# Нижняя граница дисперсии компоненты (std 0.01 в нормированных координатах кадра):
# компонента не может стянуться на две-три точки и выиграть по BIC
_REG_COVAR = 1e-4
# Минимум точек на компоненту смеси
_MIN_ZONE_POINTS = 3


class ZoneLearningException(ReidTopologyException):
    """Исключение для ошибок обучения и поиска зон"""
    pass


def learn_camera_zones(camera: str, kind: str, points: Sequence[Point], k_max: int = 5, seed: int = 0) -> List[Zone]:
    """
    Кластеризует точки одной камеры одного типа.

    Число компонент выбирается по минимуму BIC среди 1..k_max
    (но не больше числа различных точек и не больше n / 3); при равенстве - меньшее.
    Модель, в которой какой-то компоненте досталось меньше трех точек, отбрасывается.
    Одна точка дает одну зону с минимальной ковариацией.
    Номера зон присваиваются в порядке (x, y) центров.

    Raises:
        ZoneLearningException: Если точек нет
    """
    X = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    if X.shape[0] == 0:
        raise ZoneLearningException(f"Нет точек для обучения зон: камера {camera}, {kind}")
    if X.shape[0] == 1:
        x, y = (float(v) for v in X[0])
        logger.debug(f"Камера {camera}, {kind}: одна точка, одна зона")
        return [Zone(camera=camera, zone_id=1, kind=kind, centroid=(x, y),
                     spread=((_REG_COVAR, 0.0), (0.0, _REG_COVAR)))]
    n_unique = np.unique(X, axis=0).shape[0]
    k_limit = max(1, min(k_max, n_unique, X.shape[0] // _MIN_ZONE_POINTS))

    best: Optional[GaussianMixture] = None
    best_bic = np.inf
    for k in range(1, k_limit + 1):
        gmm = GaussianMixture(
            n_components=k,
            covariance_type="full",
            reg_covar=_REG_COVAR,
            n_init=2,
            random_state=derive_seed(seed, camera, kind, k),
        )
        gmm.fit(X)
        if k > 1 and np.bincount(gmm.predict(X), minlength=k).min() < _MIN_ZONE_POINTS:
            continue
        bic = gmm.bic(X)
        if bic < best_bic:
            best, best_bic = gmm, bic

    order = sorted(range(best.n_components), key=lambda j: (best.means_[j][0], best.means_[j][1]))
    zones = [
        Zone(
            camera=camera,
            zone_id=zone_id,
            kind=kind,
            centroid=(float(best.means_[j][0]), float(best.means_[j][1])),
            spread=tuple(tuple(float(x) for x in row) for row in best.covariances_[j]),
        )
        for zone_id, j in enumerate(order, start=1)
    ]
    logger.debug(f"Камера {camera}, {kind}: {len(zones)} зон по {X.shape[0]} точкам (BIC={best_bic:.1f})")
    return zones


def learn_zones(stream: Iterable[PersonTrack], k_max: int = 5, seed: int = 0) -> Tuple[Zone, ...]:
    """
    Обучает зоны входа (по точкам входа) и выхода (по точкам выхода) для каждой камеры.

    Args:
        stream: Треки
        k_max: Максимальное число зон на камеру и тип
        seed: Зерно EM

    Returns:
        Tuple[Zone, ...]: Зоны, упорядоченные по (камера, тип, номер)
    """
    zones: List[Zone] = []
    for camera, tracks in sorted(tracks_by_camera(stream).items()):
        zones.extend(learn_camera_zones(camera, ENTRY, [t.entry_point for t in tracks], k_max, seed))
        zones.extend(learn_camera_zones(camera, EXIT, [t.exit_point for t in tracks], k_max, seed))
    logger.info(f"Обучено зон: {len(zones)}")
    return tuple(zones)


def _candidates(zones: Iterable[Zone], kind: str, camera: Optional[str]) -> List[Zone]:
    found = [z for z in zones if z.kind == kind and (camera is None or z.camera == camera)]
    if not found:
        raise ZoneLearningException(f"Нет зон типа {kind} для камеры {camera}")
    return sorted(found, key=lambda z: (z.camera, z.zone_id))


def _log_likelihood(candidates: Sequence[Zone], points: np.ndarray) -> np.ndarray:
    return np.column_stack([
        np.atleast_1d(multivariate_normal.logpdf(points, mean=z.centroid, cov=z.covariance, allow_singular=True))
        for z in candidates
    ])


def assign_zone(zones: Iterable[Zone], point: Point, kind: str, camera: Optional[str] = None) -> Zone:
    """Зона с максимальным правдоподобием точки; при равенстве - наименьший номер"""
    candidates = _candidates(zones, kind, camera)
    scores = _log_likelihood(candidates, np.asarray([point], dtype=np.float64))[0]
    return candidates[int(np.argmax(scores))]


def route_tracks(stream: Sequence[PersonTrack], zones: Sequence[Zone]) -> Dict[int, Tuple[str, str]]:
    """
    Узлы зон для каждого трека: seq -> (зона входа, зона выхода).

    Треки камер без обученных зон пропускаются.
    """
    routes: Dict[int, Tuple[str, str]] = {}
    for camera, tracks in tracks_by_camera(stream).items():
        try:
            entries = _candidates(zones, ENTRY, camera)
            exits = _candidates(zones, EXIT, camera)
        except ZoneLearningException:
            logger.warning(f"Для камеры {camera} нет зон, ее треки не маршрутизируются")
            continue
        entry_idx = np.argmax(_log_likelihood(entries, np.asarray([t.entry_point for t in tracks])), axis=1)
        exit_idx = np.argmax(_log_likelihood(exits, np.asarray([t.exit_point for t in tracks])), axis=1)
        for track, i, j in zip(tracks, entry_idx, exit_idx):
            routes[track.seq] = (entries[int(i)].node_id, exits[int(j)].node_id)
    return routes
