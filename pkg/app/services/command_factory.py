"""
Фабрика подкоманд командной строки с декларативной регистрацией
"""
import argparse
from functools import wraps
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

# (флаги, именованные аргументы add_argument)
ArgumentSpec = Tuple[Tuple[str, ...], Dict[str, Any]]


class CommandFactory:
    """
    Реестр подкоманд: имя -> обработчик, описание и аргументы.

    Обработчик получает argparse.Namespace и возвращает код выхода.
    """

    _commands: Dict[str, Dict[str, Any]] = {}

    @classmethod
    def register_command(
        cls,
        name: str,
        handler: Callable = None,
        *,
        description: str = None,
        arguments: Optional[Sequence[ArgumentSpec]] = None,
    ):
        """
        Регистрирует обработчик подкоманды. Может использоваться как декоратор или напрямую.

        Args:
            name: Имя подкоманды (например, "simulate")
            handler: Функция-обработчик (опционально при использовании как декоратор)
            description: Описание для справки
            arguments: Дополнительные аргументы подкоманды

        Returns:
            Callable: Декоратор или зарегистрированная функция
        """
        def decorator(func):
            cls._commands[name] = {
                "function": func,
                "description": description or (func.__doc__ or "").strip() or f"Command {name}",
                "arguments": list(arguments or []),
            }

            @wraps(func)
            def wrapper(*args, **kwargs):
                return func(*args, **kwargs)
            return wrapper

        if handler is not None:
            return decorator(handler)
        return decorator

    @classmethod
    def get_command(cls, name: str) -> Optional[Callable]:
        data = cls._commands.get(name)
        return data["function"] if data else None

    @classmethod
    def get_supported_commands(cls) -> List[str]:
        return list(cls._commands.keys())

    @classmethod
    def get_command_info(cls, name: str = None) -> Optional[Dict[str, Any]]:
        """Описание одной подкоманды или всех зарегистрированных"""
        if name:
            data = cls._commands.get(name)
            if data is None:
                return None
            return {"name": name, "description": data["description"]}
        return {key: {"description": data["description"]} for key, data in cls._commands.items()}

    @classmethod
    def build_parser(cls, common: argparse.ArgumentParser, prog: str = None) -> argparse.ArgumentParser:
        """Парсер со всеми зарегистрированными подкомандами и общими флагами"""
        parser = argparse.ArgumentParser(prog=prog, description="Topology inference and person re-identification")
        subparsers = parser.add_subparsers(dest="command", metavar="command")
        subparsers.required = True
        for name, data in cls._commands.items():
            sub = subparsers.add_parser(name, help=data["description"], parents=[common])
            for flags, kwargs in data["arguments"]:
                sub.add_argument(*flags, **kwargs)
        return parser


def register_command(name: str, description: str = None, arguments: Optional[Sequence[ArgumentSpec]] = None):
    """
    Декоратор для регистрации подкоманды.

    Пример:
        @register_command("simulate", "Генерация потока событий", arguments=[(("--name",), {"default": "events"})])
        def simulate_command(args):
            ...
            return 0
    """
    return CommandFactory.register_command(name, description=description, arguments=arguments)

