"""
Метрики качества: точность ре-идентификации, расстояние Бхаттачарии
между топологиями, точность и полнота восстановленных связей
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, Optional, Tuple

import numpy as np
from scipy.integrate import quad
from scipy.stats import norm

from app.core.exceptions import ReidTopologyException
from app.models.ground_truth import GroundTruth
from app.models.topology import CAMERA_LEVEL, Correspondence, EdgeKey, TopologyEdge, TopologyGraph
from app.models.zone import ENTRY, EXIT, Zone, zone_node_id

logger = logging.getLogger(__name__)

Gaussian = Tuple[float, float]


class MetricsException(ReidTopologyException):
    """Исключение для ошибок расчета метрик"""
    pass


def reid_accuracy(pred: Iterable[Correspondence], gt: GroundTruth) -> float:
    """
    TP / T_gt: доля истинных пар, найденных хотя бы одним предсказанием.

    Пара засчитывается, только если разметка содержит переход именно
    между этими двумя треками; дубликаты считаются один раз.

    Raises:
        MetricsException: Если разметка пуста
    """
    truth = gt.pairs
    if not truth:
        raise MetricsException("no ground truth")
    found = {c.pair for c in pred} & truth
    return len(found) / len(truth)


def bhattacharyya_gaussian(g1: Gaussian, g2: Gaussian) -> float:
    """
    Расстояние Бхаттачарии между N(mu1, s1^2) и N(mu2, s2^2) в замкнутой форме.
    """
    mu1, s1 = g1
    mu2, s2 = g2
    if s1 <= 0 or s2 <= 0:
        raise MetricsException(f"sigma должна быть > 0: {s1}, {s2}")
    var = s1 ** 2 + s2 ** 2
    return 0.25 * (mu1 - mu2) ** 2 / var + 0.5 * math.log(var / (2.0 * s1 * s2))


def bhattacharyya_quadrature(g1: Gaussian, g2: Gaussian) -> float:
    """То же расстояние по определению: -ln интеграла sqrt(p q), численно"""
    (mu1, s1), (mu2, s2) = g1, g2
    lo = min(mu1 - 12 * s1, mu2 - 12 * s2)
    hi = max(mu1 + 12 * s1, mu2 + 12 * s2)
    value, _ = quad(
        lambda x: math.sqrt(norm.pdf(x, mu1, s1) * norm.pdf(x, mu2, s2)),
        lo, hi, points=[mu1, mu2], epsabs=1e-13, epsrel=1e-12, limit=200,
    )
    return -math.log(value)


@dataclass
class TopologyDistance:
    matched: Optional[float]
    penalized: float
    matched_links: int
    missing_links: int
    per_link: Dict[str, float] = field(default_factory=dict)


def flat_fit_penalty(gt_sigma: float, flat_sigma: float) -> float:
    """Штраф за пропущенную связь: расстояние от истинной гауссианы до плоской (sigma = ширина окна)"""
    return bhattacharyya_gaussian((0.0, gt_sigma), (0.0, flat_sigma))


def topology_distance(
    inferred: TopologyGraph,
    gt: TopologyGraph,
    penalty: Optional[float] = None,
    flat_sigma: float = 600.0,
) -> TopologyDistance:
    """
    Среднее расстояние Бхаттачарии по истинным связям.

    matched - среднее только по найденным связям (None, если найденных нет),
    penalized - среднее по всем истинным связям, где пропущенная связь
    дает штраф penalty или, если он не задан, flat_fit_penalty.

    Raises:
        MetricsException: Если в истинном графе нет связей
    """
    truth = [edge for edge in gt.edges if edge.valid and edge.distribution is not None]
    if not truth:
        raise MetricsException("Истинный граф не содержит связей")
    matched, penalized, per_link = [], [], {}
    for edge in truth:
        found = inferred.edge(edge.source, edge.dest)
        name = f"{edge.source}->{edge.dest}"
        if found is not None and found.valid and found.distribution is not None:
            d = bhattacharyya_gaussian(
                (found.distribution.mu, found.distribution.sigma),
                (edge.distribution.mu, edge.distribution.sigma),
            )
            matched.append(d)
        else:
            d = penalty if penalty is not None else flat_fit_penalty(edge.distribution.sigma, flat_sigma)
            logger.info(f"Связь {name} не найдена, штраф {d:.4f}")
        penalized.append(d)
        per_link[name] = d
    return TopologyDistance(
        matched=float(np.mean(matched)) if matched else None,
        penalized=float(np.mean(penalized)),
        matched_links=len(matched),
        missing_links=len(truth) - len(matched),
        per_link=per_link,
    )


def link_precision_recall(inferred: TopologyGraph, gt: TopologyGraph) -> Tuple[float, float]:
    """
    Точность и полнота по множествам валидных направленных связей.

    Пустое предсказание имеет точность 1; пустая разметка - полноту 1.
    """
    predicted = inferred.valid_keys()
    truth = gt.valid_keys()
    correct = len(predicted & truth)
    precision = correct / len(predicted) if predicted else 1.0
    recall = correct / len(truth) if truth else 1.0
    return precision, recall


def _nearest_zone(zone: Zone, reference: Iterable[Zone]) -> Optional[Zone]:
    same = [z for z in reference if z.camera == zone.camera and z.kind == zone.kind]
    if not same:
        return None
    distances = [np.hypot(zone.centroid[0] - z.centroid[0], zone.centroid[1] - z.centroid[1]) for z in same]
    return same[int(np.argmin(distances))]


def align_zone_graph(inferred: TopologyGraph, gt: TopologyGraph) -> TopologyGraph:
    """
    Переименовывает обученные зоны в зоны сценария той же камеры по ближайшему центру,
    чтобы сравнивать связи Zone-to-Zone с разметкой.

    Если несколько ребер попадают в одну пару, остается ребро с наибольшей уверенностью.
    Графы уровня камер возвращаются без изменений.
    """
    if inferred.level == CAMERA_LEVEL or not inferred.zones or not gt.zones:
        return inferred
    mapping: Dict[Tuple[str, str], str] = {}
    for zone in inferred.zones:
        target = _nearest_zone(zone, gt.zones)
        if target is not None:
            mapping[(zone.node_id, zone.kind)] = zone_node_id(target.camera, target.zone_id)

    best: Dict[EdgeKey, TopologyEdge] = {}
    for edge in inferred.edges:
        source = mapping.get((edge.source, EXIT))
        dest = mapping.get((edge.dest, ENTRY))
        if source is None or dest is None:
            continue
        renamed = TopologyEdge(
            source=source, dest=dest, window=edge.window,
            distribution=edge.distribution, valid=edge.valid, retained=edge.retained,
        )
        current = best.get(renamed.key)
        if current is None or (renamed.valid, renamed.confidence) > (current.valid, current.confidence):
            best[renamed.key] = renamed
    return TopologyGraph(
        level=inferred.level,
        nodes=gt.nodes,
        edges=tuple(best[key] for key in sorted(best)),
        zones=gt.zones,
    )
