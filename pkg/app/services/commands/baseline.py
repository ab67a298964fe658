import argparse
import logging

from app.services.baselines import event_correlation_baseline, exhaustive_baseline, exhaustive_topology
from app.services.command_factory import register_command
from app.services.commands.common import EVENTS_FILE, build_report, input_path, pipeline_config, store_for
from app.services.event_io import import_events

logger = logging.getLogger(__name__)

METHOD_EXHAUSTIVE = "exhaustive"
METHOD_EVENT_CORR = "event-corr"


@register_command(
    "baseline",
    "Базовые методы: полный перебор или корреляция событий",
    arguments=[
        (("method",), {"choices": [METHOD_EXHAUSTIVE, METHOD_EVENT_CORR]}),
        (("--events",), {"default": None, "help": "Поток событий (по умолчанию events.jsonl)"}),
    ],
)
def baseline_command(args: argparse.Namespace) -> int:
    cfg = pipeline_config(args)
    store = store_for(args)
    stream, _ = import_events(input_path(store, args.events, EVENTS_FILE))

    if args.method == METHOD_EXHAUSTIVE:
        result = exhaustive_baseline(stream, cfg)
        store.save_result(result.stage, result.comparisons, result.correspondences, "results_exhaustive.json")
        store.save_model(build_report(result.stage, cfg, result.correspondences, result.comparisons),
                         "report_exhaustive.json")
        store.save_topology(exhaustive_topology(stream, cfg, result=result), "topology_exhaustive.json")
        store.record_timings({METHOD_EXHAUSTIVE: result.wall_time})
        return 0

    graph = event_correlation_baseline(stream, cfg)
    store.save_topology(graph, "topology_event_corr.json")
    return 0
