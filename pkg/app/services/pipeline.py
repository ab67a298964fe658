"""
Совместный вывод топологии сети камер и ре-идентификации.

Этапы: связи CAM-to-CAM -> обучение зон -> связи Zone-to-Zone ->
итеративное уточнение (окно, серии лесов, поиск около t+mu, перерасчет
распределений) до сходимости. Тестовый этап использует замороженную топологию.
"""
import logging
import time
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from app.models.forest import ForestSeries
from app.models.ground_truth import GroundTruth
from app.models.observation import PersonTrack, tracks_by_camera
from app.models.topology import (
    CAMERA_LEVEL,
    ZONE_LEVEL,
    Correspondence,
    EdgeKey,
    SearchWindow,
    TopologyEdge,
    TopologyGraph,
    TransitDistribution,
)
from app.models.zone import ENTRY, EXIT, Zone, camera_of
from app.schemas.config import PipelineConfig
from app.services.forest import train_forest_series
from app.services.metrics import bhattacharyya_gaussian, reid_accuracy
from app.services.topology import (
    GatherStats,
    TopologyException,
    distribution_bounds,
    filter_reliable,
    fit_transit,
    gather_correspondences,
    update_window,
)
from app.services.zones import learn_zones, route_tracks

logger = logging.getLogger(__name__)

STAGE_CAM = "cam"
STAGE_ZONE = "zone"
STAGE_TEST = "test"


@dataclass
class StageRecord:
    """Итоги одного этапа для отчета и истории сходимости"""
    stage: str
    edges_examined: int
    valid_edges: int
    correspondences: int
    reliable: int
    comparisons: int
    convergence: Optional[float] = None
    accuracy: Optional[float] = None
    accuracy_reliable: Optional[float] = None
    transitions: List[str] = field(default_factory=list)


@dataclass
class ReidResult:
    correspondences: List[Correspondence]
    comparisons: int
    stage: str
    wall_time: float = 0.0


@dataclass
class PipelineState:
    """
    Состояние вывода: граф камер, граф зон, соответствия по ребрам,
    кэш серий лесов (узел, T) и история этапов.
    """
    cam_topology: TopologyGraph
    topology: TopologyGraph
    zones: Tuple[Zone, ...] = ()
    correspondences: Dict[EdgeKey, List[Correspondence]] = field(default_factory=dict)
    cam_correspondences: Dict[EdgeKey, List[Correspondence]] = field(default_factory=dict)
    tracked: Tuple[EdgeKey, ...] = ()
    iteration: int = 0
    history: List[StageRecord] = field(default_factory=list)
    series: Dict[Tuple[str, float], ForestSeries] = field(default_factory=dict, repr=False)

    @property
    def windows(self) -> Dict[EdgeKey, float]:
        return {edge.key: edge.window.T for edge in self.topology.edges}

    def result(self, reliable_only: bool = False, theta_sim: float = 0.0) -> List[Correspondence]:
        """Соответствия последнего прохода по валидным ребрам"""
        found = [c for key in sorted(self.topology.valid_keys()) for c in self.correspondences.get(key, [])]
        if reliable_only:
            found = filter_reliable(found, theta_sim)
        return sorted(found, key=lambda c: (c.exit_track.seq, c.source, c.dest, c.matched_track.seq))


class _StreamIndex:
    """Треки потока, сгруппированные по камерам и по зонам входа/выхода"""

    def __init__(self, stream: Sequence[PersonTrack], zones: Sequence[Zone] = ()):
        self.stream = list(stream)
        self.by_camera = tracks_by_camera(self.stream)
        self.exits_by_zone: Dict[str, List[PersonTrack]] = {}
        self.entries_by_zone: Dict[str, List[PersonTrack]] = {}
        if zones:
            routes = route_tracks(self.stream, zones)
            for track in self.stream:
                if track.seq not in routes:
                    continue
                entry_node, exit_node = routes[track.seq]
                self.entries_by_zone.setdefault(entry_node, []).append(track)
                self.exits_by_zone.setdefault(exit_node, []).append(track)

    def exits(self, node: str, level: str) -> List[PersonTrack]:
        source = self.by_camera if level == CAMERA_LEVEL else self.exits_by_zone
        return source.get(node, [])

    def gallery(self, node: str, level: str) -> List[PersonTrack]:
        source = self.by_camera if level == CAMERA_LEVEL else self.entries_by_zone
        return [track.as_gallery() for track in source.get(node, [])]


def _check_sequence(stream: Sequence[PersonTrack]) -> None:
    seqs = [track.seq for track in stream]
    if len(set(seqs)) != len(seqs):
        raise TopologyException("Номера треков в потоке должны быть уникальны")


def _series(
    cache: Dict[Tuple[str, float], ForestSeries],
    index: _StreamIndex,
    node: str,
    level: str,
    window_T: float,
    cfg: PipelineConfig,
    n_jobs: Optional[int],
) -> ForestSeries:
    key = (node, window_T)
    if key not in cache:
        cache[key] = train_forest_series(
            index.gallery(node, level),
            window_T=window_T,
            stride=cfg.stride_for(window_T),
            hyper=cfg.forest,
            seed=cfg.seed,
            node=node,
            n_jobs=n_jobs,
        )
    return cache[key]


def _edge(source: str, dest: str, window: SearchWindow, distribution: TransitDistribution,
          cfg: PipelineConfig) -> TopologyEdge:
    valid = distribution.support > 0 and distribution.confidence > cfg.theta_conf
    return TopologyEdge(source=source, dest=dest, window=window, distribution=distribution, valid=valid)


def _accuracy(found: Sequence[Correspondence], cfg: PipelineConfig, gt: Optional[GroundTruth]):
    if gt is None or not len(gt):
        return None, None
    return reid_accuracy(found, gt), reid_accuracy(filter_reliable(found, cfg.theta_sim), gt)


def _examine(
    pairs: Sequence[EdgeKey],
    index: _StreamIndex,
    level: str,
    window: SearchWindow,
    cfg: PipelineConfig,
    cache: Dict[Tuple[str, float], ForestSeries],
    n_jobs: Optional[int],
) -> Tuple[List[TopologyEdge], Dict[EdgeKey, List[Correspondence]], GatherStats]:
    """Сбор соответствий и оценка распределения для каждой пары узлов при общем окне"""
    stats = GatherStats()
    edges, found = [], {}
    for source, dest in pairs:
        series = _series(cache, index, dest, level, window.T, cfg, n_jobs)
        cands = gather_correspondences(
            source, dest, index.exits(source, level), index.gallery(dest, level), series, window, stats
        )
        reliable = filter_reliable(cands, cfg.theta_sim)
        distribution = fit_transit(source, dest, [c.delta_t for c in reliable], window.lo, window.hi, cfg)
        edge = _edge(source, dest, window, distribution, cfg)
        edges.append(edge)
        found[edge.key] = cands
        logger.debug(
            f"{source}->{dest}: {len(cands)} соответствий, {len(reliable)} надежных, "
            f"conf={distribution.confidence:.3f}, {'валидна' if edge.valid else 'отклонена'}"
        )
    return edges, found, stats


def _record(stage: str, edges: Sequence[TopologyEdge], found: Dict[EdgeKey, List[Correspondence]],
            stats: GatherStats, cfg: PipelineConfig, gt: Optional[GroundTruth], **extra) -> StageRecord:
    valid_keys = [edge.key for edge in edges if edge.valid]
    all_found = [c for key in valid_keys for c in found.get(key, [])]
    accuracy, accuracy_reliable = _accuracy(all_found, cfg, gt)
    return StageRecord(
        stage=stage,
        edges_examined=len(edges),
        valid_edges=len(valid_keys),
        correspondences=len(all_found),
        reliable=len(filter_reliable(all_found, cfg.theta_sim)),
        comparisons=stats.comparisons,
        accuracy=accuracy,
        accuracy_reliable=accuracy_reliable,
        **extra,
    )


def _cam_stage(index: _StreamIndex, cfg: PipelineConfig, cache, n_jobs):
    cameras = sorted(index.by_camera)
    pairs = [(a, b) for a in cameras for b in cameras if a != b]
    edges, found, stats = _examine(pairs, index, CAMERA_LEVEL, SearchWindow.two_sided(cfg.initial_window_T),
                                   cfg, cache, n_jobs)
    graph = TopologyGraph(level=CAMERA_LEVEL, nodes=tuple(cameras), edges=tuple(edges))
    return graph, found, stats


def infer_cam_links(stream: Sequence[PersonTrack], cfg: PipelineConfig, n_jobs: Optional[int] = None) -> TopologyGraph:
    """
    Связи CAM-to-CAM: перебор всех упорядоченных пар камер с окном [t-T, t+T].

    Пары без надежных соответствий невалидны с conf = 0.
    """
    _check_sequence(stream)
    graph, _, _ = _cam_stage(_StreamIndex(stream), cfg, {}, n_jobs)
    return graph


def _zone_pairs(cam_graph: TopologyGraph, zones: Sequence[Zone]) -> List[EdgeKey]:
    """
    Пары выход->вход разных камер, чьи камеры образуют валидную связь.

    Пара камер валидна, если валидно хотя бы одно из двух направлений:
    при окне [t-T, t+T] поток B->A проявляется и на ребре A->B (с dt < 0).
    """
    exit_nodes = sorted({z.node_id for z in zones if z.kind == EXIT})
    entry_nodes = sorted({z.node_id for z in zones if z.kind == ENTRY})
    valid = {frozenset(key) for key in cam_graph.valid_keys()}
    return [
        (source, dest)
        for source in exit_nodes
        for dest in entry_nodes
        if camera_of(source) != camera_of(dest) and frozenset((camera_of(source), camera_of(dest))) in valid
    ]


def _zone_stage(index: _StreamIndex, cam_graph: TopologyGraph, zones, cfg, cache, n_jobs):
    pairs = _zone_pairs(cam_graph, zones)
    edges, found, stats = _examine(pairs, index, ZONE_LEVEL, SearchWindow.one_sided(cfg.initial_window_T),
                                   cfg, cache, n_jobs)
    nodes = sorted({z.node_id for z in zones})
    graph = TopologyGraph(level=ZONE_LEVEL, nodes=tuple(nodes), edges=tuple(edges), zones=tuple(zones))
    return graph, found, stats


def infer_zone_links(
    stream: Sequence[PersonTrack],
    cam_graph: TopologyGraph,
    zones: Sequence[Zone],
    cfg: PipelineConfig,
    n_jobs: Optional[int] = None,
) -> TopologyGraph:
    """
    Связи Zone-to-Zone: только пары зона выхода -> зона входа разных камер,
    связанных валидной связью CAM-to-CAM; окно [t, t+T].
    """
    _check_sequence(stream)
    graph, _, _ = _zone_stage(_StreamIndex(stream, zones), cam_graph, zones, cfg, {}, n_jobs)
    return graph


def next_window(edge: TopologyEdge, cfg: PipelineConfig) -> SearchWindow:
    """
    Шаг 1: новое окно вокруг mu шириной (T_U - T_L)/(1 - E), не шире initial_window_T.

    Вырожденная аппроксимация оставляет прежнее окно.
    """
    distribution = edge.distribution
    if distribution is None or distribution.degenerate:
        return edge.window
    T_L, T_U = distribution_bounds(distribution, cfg)
    try:
        T = update_window(distribution.fit_error, T_L, T_U)
    except TopologyException as e:
        logger.info(f"{edge.source}->{edge.dest}: {e}")
        return edge.window
    T = min(T, cfg.initial_window_T)
    return SearchWindow.centered(distribution.mu, T, T_L=T_L, T_U=T_U)


def refit_edges(
    state: PipelineState,
    correspondences: Dict[EdgeKey, List[Correspondence]],
    cfg: PipelineConfig,
    previous: Optional[TopologyGraph] = None,
) -> Tuple[TopologyGraph, float, List[str]]:
    """
    Шаг 4: перерасчет распределений отслеживаемых ребер по надежным соответствиям.

    Ребро, чья новая аппроксимация вырождена, сохраняет прежние распределение,
    окно и валидность (из previous, если задан) и помечается retained.

    Returns:
        Tuple: (новый граф, метрика сходимости, переходы валидности)
    """
    previous = previous or state.topology
    updated, transitions, distances = [], [], []
    for key in state.tracked:
        edge = state.topology.edge(*key)
        before = previous.edge(*key) or edge
        reliable = filter_reliable(correspondences.get(key, []), cfg.theta_sim)
        distribution = fit_transit(key[0], key[1], [c.delta_t for c in reliable],
                                   edge.window.lo, edge.window.hi, cfg)
        if distribution.degenerate:
            new_edge = replace(before, retained=True)
            logger.warning(f"{key[0]}->{key[1]}: вырожденная аппроксимация ({len(reliable)} надежных), "
                           f"сохранено прежнее распределение")
        else:
            new_edge = _edge(key[0], key[1], edge.window, distribution, cfg)
        if new_edge.valid != before.valid:
            transitions.append(f"{key[0]}->{key[1]}: {'valid' if new_edge.valid else 'invalid'}")
            logger.info(f"Связь {key[0]}->{key[1]} стала {'валидной' if new_edge.valid else 'невалидной'}")
        if new_edge.valid and before.distribution is not None and new_edge.distribution is not None:
            distances.append(bhattacharyya_gaussian(
                (before.distribution.mu, before.distribution.sigma),
                (new_edge.distribution.mu, new_edge.distribution.sigma),
            ))
        updated.append(new_edge)
    metric = float(np.mean(distances)) if distances else 0.0
    return state.topology.with_edges(updated), metric, transitions


def iterate(
    state: PipelineState,
    stream: Sequence[PersonTrack],
    cfg: PipelineConfig,
    gt: Optional[GroundTruth] = None,
    n_jobs: Optional[int] = None,
) -> PipelineState:
    """
    Один проход шагов 1-4 по отслеживаемым ребрам:
    окно -> серии лесов с новым T -> поиск около t+mu -> перерасчет распределений.

    Отслеживаются все ребра, бывшие валидными хотя бы раз, поэтому ребро
    может как потерять, так и восстановить валидность.
    """
    index = _StreamIndex(stream, state.zones)
    windowed = state.topology.with_edges(
        replace(state.topology.edge(*key), window=next_window(state.topology.edge(*key), cfg))
        for key in state.tracked
    )
    stats = GatherStats()
    found: Dict[EdgeKey, List[Correspondence]] = {}
    for key in state.tracked:
        window = windowed.edge(*key).window
        series = _series(state.series, index, key[1], ZONE_LEVEL, window.T, cfg, n_jobs)
        found[key] = gather_correspondences(
            key[0], key[1], index.exits(key[0], ZONE_LEVEL), index.gallery(key[1], ZONE_LEVEL),
            series, window, stats,
        )

    staged = replace(state, topology=windowed)
    topology, metric, transitions = refit_edges(staged, found, cfg, previous=state.topology)
    iteration = state.iteration + 1
    record = _record(f"iteration-{iteration}", [topology.edge(*k) for k in state.tracked], found, stats, cfg, gt,
                     convergence=metric, transitions=transitions)
    logger.info(
        f"Итерация {iteration}: валидных связей {record.valid_edges}, сходимость {metric:.5f}, "
        f"сравнений {stats.comparisons}"
    )
    tracked = tuple(sorted(set(state.tracked) | topology.valid_keys()))
    return replace(
        state,
        topology=topology,
        correspondences=found,
        tracked=tracked,
        iteration=iteration,
        history=state.history + [record],
    )


def run_training(
    stream: Sequence[PersonTrack],
    cfg: PipelineConfig,
    gt: Optional[GroundTruth] = None,
    n_jobs: Optional[int] = None,
) -> Tuple[PipelineState, ReidResult]:
    """
    Полный обучающий этап: CAM-to-CAM -> зоны -> Zone-to-Zone -> итерации
    до метрики сходимости < tolerance или max_iterations.

    Args:
        stream: Обучающий поток (метки не используются)
        cfg: Конфигурация
        gt: Разметка только для истории точности

    Returns:
        Tuple[PipelineState, ReidResult]: Итоговое состояние и соответствия последнего прохода
    """
    started = time.perf_counter()
    _check_sequence(stream)
    cache: Dict[Tuple[str, float], ForestSeries] = {}

    index = _StreamIndex(stream)
    cam_graph, cam_found, cam_stats = _cam_stage(index, cfg, cache, n_jobs)
    history = [_record(STAGE_CAM, cam_graph.edges, cam_found, cam_stats, cfg, gt)]
    logger.info(f"CAM-to-CAM: {history[0].valid_edges} валидных связей из {len(cam_graph.edges)}")
    empty = TopologyGraph(level=ZONE_LEVEL, nodes=())
    state = PipelineState(cam_topology=cam_graph, topology=empty, cam_correspondences=cam_found,
                          history=history, series=cache)
    comparisons = cam_stats.comparisons
    if not cam_graph.valid_edges():
        logger.info("Нет валидных связей между камерами, обучение завершено после CAM-to-CAM")
        return state, ReidResult([], comparisons, STAGE_CAM, time.perf_counter() - started)

    zones = learn_zones(stream, cfg.k_max_zones, cfg.seed)
    zone_index = _StreamIndex(stream, zones)
    zone_graph, zone_found, zone_stats = _zone_stage(zone_index, cam_graph, zones, cfg, cache, n_jobs)
    history.append(_record(STAGE_ZONE, zone_graph.edges, zone_found, zone_stats, cfg, gt))
    logger.info(f"Zone-to-Zone: {history[-1].valid_edges} валидных связей из {len(zone_graph.edges)}")
    comparisons += zone_stats.comparisons
    state = replace(state, topology=zone_graph, zones=zones, correspondences=zone_found,
                    tracked=tuple(sorted(zone_graph.valid_keys())), history=history)
    if not state.tracked:
        return state, ReidResult([], comparisons, STAGE_ZONE, time.perf_counter() - started)

    for _ in range(cfg.max_iterations):
        state = iterate(state, stream, cfg, gt, n_jobs)
        comparisons += state.history[-1].comparisons
        if state.history[-1].convergence < cfg.tolerance:
            logger.info(f"Топология сошлась за {state.iteration} итераций")
            break
    else:
        logger.warning(f"Достигнут предел итераций ({cfg.max_iterations}) без сходимости")

    stage = f"iteration-{state.iteration}" if state.iteration else STAGE_ZONE
    return state, ReidResult(state.result(), comparisons, stage, time.perf_counter() - started)


def run_test(
    stream_test: Sequence[PersonTrack],
    topology: TopologyGraph,
    cfg: PipelineConfig,
    n_jobs: Optional[int] = None,
) -> ReidResult:
    """
    Ре-идентификация на новом потоке по замороженной топологии:
    для каждой валидной связи - серия лесов на треках зоны входа
    с окном связи и поиск около t+mu. Топология не меняется.
    """
    started = time.perf_counter()
    _check_sequence(stream_test)
    if not topology.valid_edges() or not stream_test:
        return ReidResult([], 0, STAGE_TEST, time.perf_counter() - started)
    index = _StreamIndex(stream_test, topology.zones)
    cache: Dict[Tuple[str, float], ForestSeries] = {}
    stats = GatherStats()
    found: List[Correspondence] = []
    for edge in topology.valid_edges():
        series = _series(cache, index, edge.dest, topology.level, edge.window.T, cfg, n_jobs)
        found.extend(gather_correspondences(
            edge.source, edge.dest, index.exits(edge.source, topology.level),
            index.gallery(edge.dest, topology.level), series, edge.window, stats,
        ))
    found.sort(key=lambda c: (c.exit_track.seq, c.source, c.dest, c.matched_track.seq))
    logger.info(f"Тестовый этап: {len(found)} соответствий по {len(topology.valid_edges())} связям")
    return ReidResult(found, stats.comparisons, STAGE_TEST, time.perf_counter() - started)


def fitted_edge(source: str, dest: str, delta_ts: Sequence[float], cfg: PipelineConfig) -> TopologyEdge:
    """Распределение по готовому набору dt и окно шага 1 для него"""
    T = cfg.initial_window_T
    lo = 0.0 if min(delta_ts, default=0.0) >= 0.0 else -T
    base = SearchWindow(lo=lo, hi=T, T=T)
    edge = _edge(source, dest, base, fit_transit(source, dest, delta_ts, lo, T, cfg), cfg)
    return replace(edge, window=next_window(edge, cfg))


def oracle_topology(stream: Sequence[PersonTrack], gt: GroundTruth, cfg: PipelineConfig) -> TopologyGraph:
    """Топология, оцененная по истинным соответствиям (верхняя граница для тестового этапа)"""
    tracks = {track.seq: track for track in stream}
    zones = gt.zones or learn_zones(stream, cfg.k_max_zones, cfg.seed)
    grouped: Dict[EdgeKey, List[float]] = {}
    for c in gt.correspondences:
        exit_track = tracks.get(c.exit_track.seq)
        if exit_track is None:
            continue
        grouped.setdefault((c.source, c.dest), []).append(c.entry_track.entry_time - exit_track.exit_time)
    edges = [fitted_edge(source, dest, deltas, cfg) for (source, dest), deltas in sorted(grouped.items())]
    nodes = sorted({z.node_id for z in zones})
    return TopologyGraph(level=ZONE_LEVEL, nodes=tuple(nodes), edges=tuple(edges), zones=tuple(zones))
