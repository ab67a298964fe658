import argparse
import logging

from app.core.config import settings
from app.core.exceptions import ReidTopologyException
from app.services.artifacts import TOPOLOGY_FILE
from app.services.command_factory import register_command
from app.services.commands.common import TEST_EVENTS_FILE, build_report, input_path, pipeline_config, store_for
from app.services.event_io import import_events
from app.services.pipeline import oracle_topology, run_test

logger = logging.getLogger(__name__)


@register_command(
    "test",
    "Ре-идентификация на тестовом потоке по замороженной топологии",
    arguments=[
        (("--events",), {"default": None, "help": "Тестовый поток (по умолчанию events_test.jsonl)"}),
        (("--topology",), {"default": None, "help": "Файл топологии (по умолчанию topology.json)"}),
        (("--oracle-gt",), {
            "default": None, "metavar": "EVENTS",
            "help": "Построить топологию по истинным соответствиям этого потока вместо загрузки",
        }),
    ],
)
def test_command(args: argparse.Namespace) -> int:
    cfg = pipeline_config(args)
    store = store_for(args)
    stream, _ = import_events(input_path(store, args.events, TEST_EVENTS_FILE))

    if args.oracle_gt:
        train_stream, train_gt = import_events(args.oracle_gt)
        if train_gt is None:
            raise ReidTopologyException(f"{args.oracle_gt}: no ground truth")
        topology = oracle_topology(train_stream, train_gt, cfg)
        store.save_topology(topology, "topology_oracle.json")
        stage, results_file = "oracle", "results_oracle.json"
    else:
        topology = store.load_topology(input_path(store, args.topology, TOPOLOGY_FILE))
        stage, results_file = "test", "results_test.json"

    result = run_test(stream, topology, cfg, n_jobs=settings.N_JOBS)
    store.save_result(result.stage, result.comparisons, result.correspondences, results_file)
    store.save_model(build_report(stage, cfg, result.correspondences, result.comparisons), f"report_{stage}.json")
    store.record_timings({stage: result.wall_time})
    logger.info(f"Тестовый этап ({stage}): {len(result.correspondences)} соответствий, {result.comparisons} сравнений")
    return 0
