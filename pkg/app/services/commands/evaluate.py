import argparse
import logging
import os

from app.core.exceptions import ReidTopologyException
from app.models.ground_truth import GroundTruth
from app.models.topology import CAMERA_LEVEL
from app.schemas.report import MetricsReport
from app.services.artifacts import TOPOLOGY_FILE
from app.services.command_factory import register_command
from app.services.commands.common import EVENTS_FILE, input_path, pipeline_config, store_for
from app.services.event_io import ground_truth_path
from app.services.metrics import align_zone_graph, link_precision_recall, reid_accuracy, topology_distance
from app.services.topology import filter_reliable

logger = logging.getLogger(__name__)


def _load_ground_truth(store, args: argparse.Namespace) -> GroundTruth:
    if args.gt:
        gt_path = args.gt
    else:
        gt_path = ground_truth_path(input_path(store, args.events, EVENTS_FILE))
    if not os.path.exists(gt_path):
        raise FileNotFoundError(f"Файл разметки не найден: {gt_path}")
    try:
        return GroundTruth.from_dict(store.load_json(os.path.abspath(gt_path)))
    except (KeyError, TypeError, ValueError) as e:
        raise ReidTopologyException(f"{gt_path}: некорректный файл разметки: {e}") from e


@register_command(
    "evaluate",
    "Метрики: точность ре-идентификации, расстояние топологий, точность и полнота связей",
    arguments=[
        (("--results",), {"default": None, "help": "Файл соответствий (по умолчанию results_train.json)"}),
        (("--topology",), {"default": None, "help": "Файл топологии (по умолчанию topology.json, если есть)"}),
        (("--events",), {"default": None, "help": "Поток, рядом с которым лежит разметка"}),
        (("--gt",), {"default": None, "help": "Явный путь к файлу разметки"}),
        (("--output",), {"default": "metrics.json", "help": "Файл метрик"}),
    ],
)
def evaluate_command(args: argparse.Namespace) -> int:
    cfg = pipeline_config(args)
    store = store_for(args)
    gt = _load_ground_truth(store, args)
    result = store.load_result(input_path(store, args.results, "results_train.json"))
    predicted = [record.to_correspondence() for record in result.correspondences]

    metrics = MetricsReport(comparisons=result.comparisons, wall_time_seconds=store.load_timings())
    if gt.correspondences:
        metrics.reid_accuracy = reid_accuracy(predicted, gt)
        metrics.reid_accuracy_reliable = reid_accuracy(filter_reliable(predicted, cfg.theta_sim), gt)
    else:
        logger.warning("Разметка не содержит истинных пар, точность не считается")

    topology_file = input_path(store, args.topology, TOPOLOGY_FILE)
    if args.topology or os.path.exists(topology_file):
        inferred = store.load_topology(topology_file)
        if inferred.level == CAMERA_LEVEL:
            truth = gt.camera_topology()
        else:
            truth = gt.topology()
            inferred = align_zone_graph(inferred, truth)
        metrics.link_precision, metrics.link_recall = link_precision_recall(inferred, truth)
        if inferred.level != CAMERA_LEVEL and truth.edges:
            distance = topology_distance(
                inferred, truth, penalty=cfg.missing_link_penalty, flat_sigma=cfg.initial_window_T,
            )
            metrics.topology_distance_matched = distance.matched
            metrics.topology_distance_penalized = distance.penalized
            metrics.matched_links = distance.matched_links
            metrics.missing_links = distance.missing_links

    store.save_model(metrics, args.output)
    logger.info(
        f"Метрики: точность {metrics.reid_accuracy}, расстояние топологий {metrics.topology_distance_penalized}, "
        f"связи P={metrics.link_precision} R={metrics.link_recall}"
    )
    return 0
