import argparse
import os

from app.services.artifacts import CAM_TOPOLOGY_FILE, TOPOLOGY_FILE
from app.services.command_factory import register_command
from app.services.commands.common import input_path, store_for


@register_command(
    "dump-plots",
    "CSV гистограмм и аппроксимаций по связям и карта уверенности",
    arguments=[
        (("--topology",), {"default": None, "help": "Файл топологии (по умолчанию topology.json)"}),
        (("--valid-only",), {"action": "store_true", "help": "Только валидные связи"}),
    ],
)
def dump_plots_command(args: argparse.Namespace) -> int:
    store = store_for(args)
    graph = store.load_topology(input_path(store, args.topology, TOPOLOGY_FILE))
    store.save_histograms(graph, "plots", valid_only=args.valid_only)
    store.save_confidence_map(graph, "plots/confidence_zone.csv")
    if os.path.exists(store.path(CAM_TOPOLOGY_FILE)):
        store.save_confidence_map(store.load_topology(CAM_TOPOLOGY_FILE), "plots/confidence_camera.csv")
    return 0
