"""
Базовые методы для сравнения: полный перебор без топологии,
корреляция событий входа/выхода без сравнения внешности
"""
import logging
import time
from typing import Dict, List, Optional, Sequence

import numpy as np

from app.models.observation import PersonTrack
from app.models.topology import ZONE_LEVEL, Correspondence, EdgeKey, SearchWindow, TopologyEdge, TopologyGraph
from app.models.zone import Zone, camera_of
from app.schemas.config import PipelineConfig
from app.services.pipeline import ReidResult, fitted_edge
from app.services.topology import filter_reliable, fit_transit
from app.services.zones import learn_zones, route_tracks

logger = logging.getLogger(__name__)

STAGE_EXHAUSTIVE = "exhaustive"


def exhaustive_baseline(stream: Sequence[PersonTrack], cfg: PipelineConfig) -> ReidResult:
    """
    Полный перебор: для каждого выхода - трек с максимальным сходством среди всех
    треков других камер со входом в [t-T, t+T]. Ни лесов, ни топологии.

    Каждый рассмотренный кандидат - одно сравнение; при равном сходстве
    выбирается трек с меньшим номером.
    """
    started = time.perf_counter()
    tracks = sorted(stream, key=lambda track: track.seq)
    if not tracks:
        return ReidResult([], 0, STAGE_EXHAUSTIVE, 0.0)
    T = cfg.initial_window_T
    entries = np.array([track.entry_time for track in tracks])
    cameras = np.array([track.camera for track in tracks])
    features = np.vstack([track.features for track in tracks])
    bounds = np.cumsum([0] + [len(track) for track in tracks])

    found: List[Correspondence] = []
    comparisons = 0
    for track in tracks:
        deltas = entries - track.exit_time
        candidates = np.flatnonzero((deltas >= -T) & (deltas <= T) & (cameras != track.camera))
        if candidates.size == 0:
            continue
        comparisons += int(candidates.size)
        rows = np.concatenate([np.arange(bounds[i], bounds[i + 1]) for i in candidates])
        pairwise = (track.features @ features[rows].T).max(axis=0)
        starts = np.cumsum([0] + [bounds[i + 1] - bounds[i] for i in candidates[:-1]])
        scores = np.maximum.reduceat(pairwise, starts)
        best = int(candidates[int(np.argmax(scores))])
        matched = tracks[best]
        found.append(Correspondence(
            exit_track=track.ref,
            matched_track=matched.ref,
            similarity=float(np.clip(scores.max(), 0.0, 1.0)),
            delta_t=matched.entry_time - track.exit_time,
            source=track.camera,
            dest=matched.camera,
        ))
    wall_time = time.perf_counter() - started
    logger.info(f"Полный перебор: {len(found)} соответствий, {comparisons} сравнений за {wall_time:.2f} с")
    return ReidResult(found, comparisons, STAGE_EXHAUSTIVE, wall_time)


def _zone_graph(zones: Sequence[Zone], edges) -> TopologyGraph:
    nodes = sorted({z.node_id for z in zones})
    return TopologyGraph(level=ZONE_LEVEL, nodes=tuple(nodes), edges=tuple(edges), zones=tuple(zones))


def exhaustive_topology(
    stream: Sequence[PersonTrack],
    cfg: PipelineConfig,
    zones: Optional[Sequence[Zone]] = None,
    result: Optional[ReidResult] = None,
) -> TopologyGraph:
    """Топология Zone-to-Zone по надежным соответствиям полного перебора"""
    if not stream:
        return TopologyGraph(level=ZONE_LEVEL, nodes=())
    zones = tuple(zones) if zones else learn_zones(stream, cfg.k_max_zones, cfg.seed)
    result = result or exhaustive_baseline(stream, cfg)
    routes = route_tracks(stream, zones)
    grouped: Dict[EdgeKey, List[float]] = {}
    for c in filter_reliable(result.correspondences, cfg.theta_sim):
        if c.exit_track.seq not in routes or c.matched_track.seq not in routes:
            continue
        key = (routes[c.exit_track.seq][1], routes[c.matched_track.seq][0])
        grouped.setdefault(key, []).append(c.delta_t)
    edges = [fitted_edge(source, dest, deltas, cfg) for (source, dest), deltas in sorted(grouped.items())]
    return _zone_graph(zones, edges)


def event_correlation_baseline(
    stream: Sequence[PersonTrack],
    cfg: PipelineConfig,
    zones: Optional[Sequence[Zone]] = None,
) -> TopologyGraph:
    """
    Корреляция событий: для каждой пары зона выхода -> зона входа другой камеры
    гистограмма всех разностей (вход - выход) в [0, T] без сравнения внешности,
    затем та же аппроксимация и проверка уверенности, что и у основного метода.
    """
    if not stream:
        return TopologyGraph(level=ZONE_LEVEL, nodes=())
    zones = tuple(zones) if zones else learn_zones(stream, cfg.k_max_zones, cfg.seed)
    routes = route_tracks(stream, zones)
    exit_times: Dict[str, List[float]] = {}
    entry_times: Dict[str, List[float]] = {}
    for track in stream:
        if track.seq not in routes:
            continue
        entry_node, exit_node = routes[track.seq]
        exit_times.setdefault(exit_node, []).append(track.exit_time)
        entry_times.setdefault(entry_node, []).append(track.entry_time)

    T = cfg.initial_window_T
    window = SearchWindow.one_sided(T)
    edges = []
    for source in sorted(exit_times):
        exits = np.asarray(exit_times[source])
        for dest in sorted(entry_times):
            if camera_of(source) == camera_of(dest):
                continue
            deltas = (np.asarray(entry_times[dest])[None, :] - exits[:, None]).ravel()
            deltas = deltas[(deltas >= 0.0) & (deltas <= T)]
            if deltas.size == 0:
                continue
            distribution = fit_transit(source, dest, deltas, window.lo, window.hi, cfg)
            valid = distribution.confidence > cfg.theta_conf
            edges.append(TopologyEdge(source=source, dest=dest, window=window, distribution=distribution, valid=valid))
    graph = _zone_graph(zones, edges)
    logger.info(f"Корреляция событий: {len(graph.valid_edges())} валидных связей из {len(edges)}")
    return graph
