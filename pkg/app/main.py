import argparse
import logging
import sys
from typing import List, Optional

from dotenv import load_dotenv
from pydantic import ValidationError

load_dotenv()

from app.core.config import settings  # noqa: E402
from app.core.exceptions import ReidTopologyException  # noqa: E402
# Импорт пакета регистрирует все подкоманды в CommandFactory
import app.services.commands  # noqa: E402,F401
from app.services.command_factory import CommandFactory  # noqa: E402

# Настраиваем базовое логирование для приложения
logging.basicConfig(level=settings.log_level, format='%(asctime)s - %(name)s - %(levelname)s - %(message)s')
logger = logging.getLogger(__name__)


def common_parser() -> argparse.ArgumentParser:
    """Флаги, общие для всех подкоманд"""
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default="default",
                        help="Файл конфигурации (для simulate - файл сценария) или default")
    common.add_argument("--seed", type=int, default=None, help="Зерно генератора случайных чисел")
    common.add_argument("--out-dir", default=settings.OUTPUT_DIR, help="Выходная директория")
    return common


def _diagnostic(error: Exception) -> str:
    if isinstance(error, ValidationError):
        item = error.errors()[0]
        where = ".".join(str(part) for part in item.get("loc", ()))
        return f"invalid configuration: {where}: {item['msg']}" if where else f"invalid configuration: {item['msg']}"
    return " ".join(str(error).split())


def main(argv: Optional[List[str]] = None) -> int:
    """
    Точка входа командной строки.

    Returns:
        int: 0 при успехе, 1 при ошибке выполнения, 2 при ошибке использования
    """
    parser = CommandFactory.build_parser(common_parser(), prog="reid-topology")
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code) if isinstance(e.code, int) else 2

    handler = CommandFactory.get_command(args.command)
    logger.info(f"Запуск подкоманды {args.command}")
    try:
        return int(handler(args) or 0)
    except (ReidTopologyException, ValidationError, OSError) as e:
        logger.debug("Подробности ошибки", exc_info=True)
        print(f"error: {args.command}: {_diagnostic(e)}", file=sys.stderr)
        return 1
