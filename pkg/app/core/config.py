from typing import Optional

from pydantic import Field, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """
    Настройки приложения.
    """

    model_config = SettingsConfigDict(
        env_file=".env",
        case_sensitive=True,
        extra="ignore",  # Игнорировать лишние поля в .env
    )

    # Общие настройки
    APP_NAME: str = "ReidTopology"
    PROJECT_NAME: str = "ReidTopology"
    DEBUG: bool = Field(default=False)
    LOG_LEVEL: str = Field(default="INFO")

    # Директория для результатов (события, отчеты, CSV)
    OUTPUT_DIR: str = Field(default="./output")

    # Зерно по умолчанию, если --seed не указан
    DEFAULT_SEED: int = 0

    # Параллельность обучения деревьев (передается в scikit-learn)
    N_JOBS: Optional[int] = 1

    @field_validator("LOG_LEVEL")
    @classmethod
    def normalize_log_level(cls, v: str) -> str:
        level = v.upper()
        if level not in ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"):
            raise ValueError(f"Неизвестный уровень логирования: {v}")
        return level

    @property
    def log_level(self) -> str:
        """Уровень логирования с учетом флага DEBUG"""
        return "DEBUG" if self.DEBUG else self.LOG_LEVEL


# Создаем экземпляр настроек
settings = Settings()

