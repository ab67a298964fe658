import argparse
import logging

from app.services.command_factory import register_command
from app.services.commands.common import EVENTS_FILE, TEST_EVENTS_FILE, seed_override, store_for
from app.services.event_io import export_events
from app.services.simulator import load_scenario, simulate, split_stream

logger = logging.getLogger(__name__)


@register_command(
    "simulate",
    "Генерация потока событий и разметки по сценарию",
    arguments=[
        (("--name",), {"default": EVENTS_FILE, "help": "Файл потока событий в выходной директории"}),
        (("--noise",), {"type": float, "default": None, "help": "Переопределение шума признаков"}),
        (("--identities",), {"type": int, "default": None, "help": "Переопределение числа людей"}),
        (("--duration",), {"type": float, "default": None, "help": "Переопределение длительности, с"}),
        (("--split-at",), {
            "type": float, "default": None,
            "help": "Время разделения на обучающую и тестовую части (тест пишется в events_test.jsonl)",
        }),
    ],
)
def simulate_command(args: argparse.Namespace) -> int:
    """Генерирует поток событий; --config - файл сценария или default"""
    spec = load_scenario(args.config, seed_override(args))
    overrides = {
        key: value
        for key, value in (("noise", args.noise), ("identities", args.identities), ("duration", args.duration))
        if value is not None
    }
    if overrides:
        # model_copy не валидирует, поэтому сценарий пересобирается
        spec = type(spec)(**{**spec.model_dump(), **overrides})
    stream, gt = simulate(spec)

    store = store_for(args)
    if args.split_at is None:
        export_events(stream, gt, store.path(args.name))
        return 0
    train, gt_train, test, gt_test = split_stream(stream, gt, args.split_at)
    export_events(train, gt_train, store.path(args.name))
    export_events(test, gt_test, store.path(TEST_EVENTS_FILE))
    logger.info(f"Поток разделен в t={args.split_at}: {len(train)} обучающих и {len(test)} тестовых треков")
    return 0
