import argparse
import logging

from app.core.config import settings
from app.services.artifacts import CAM_TOPOLOGY_FILE, TOPOLOGY_FILE
from app.services.command_factory import register_command
from app.services.commands.common import EVENTS_FILE, build_report, input_path, pipeline_config, store_for
from app.services.event_io import import_events
from app.services.pipeline import run_training

logger = logging.getLogger(__name__)


@register_command(
    "train",
    "Совместный вывод топологии и ре-идентификации на обучающем потоке",
    arguments=[
        (("--events",), {"default": None, "help": "Поток событий (по умолчанию events.jsonl в выходной директории)"}),
        (("--save-forests",), {"action": "store_true", "help": "Сохранить серии лесов валидных связей"}),
    ],
)
def train_command(args: argparse.Namespace) -> int:
    cfg = pipeline_config(args)
    store = store_for(args)
    stream, gt = import_events(input_path(store, args.events, EVENTS_FILE))

    state, result = run_training(stream, cfg, gt=gt, n_jobs=settings.N_JOBS)

    store.save_topology(state.topology, TOPOLOGY_FILE)
    store.save_topology(state.cam_topology, CAM_TOPOLOGY_FILE)
    store.save_result(result.stage, result.comparisons, result.correspondences, "results_train.json")
    store.save_model(build_report("train", cfg, result.correspondences, result.comparisons, state), "report_train.json")
    store.save_confidence_map(state.cam_topology, "confidence_map.csv")
    store.record_timings({"train": result.wall_time})

    if args.save_forests:
        for edge in state.topology.valid_edges():
            series = state.series.get((edge.dest, edge.window.T))
            if series is not None:
                store.save_series(series, f"forests/{edge.dest}_T{edge.window.T:g}.json")

    logger.info(
        f"Обучение завершено: {len(state.topology.valid_edges())} валидных связей, "
        f"{len(result.correspondences)} соответствий, {result.comparisons} сравнений"
    )
    return 0
