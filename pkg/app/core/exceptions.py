"""
Базовые исключения приложения.

Каждый сервис объявляет собственный класс ошибки рядом со своим кодом,
но все они наследуются от ReidTopologyException, чтобы CLI мог
перехватывать их одним обработчиком.
"""


class ReidTopologyException(Exception):
    """Базовое исключение для ошибок предметной области"""
    pass
