"""
Схемы конфигурации конвейера (файл конфигурации в формате JSON)
"""
import json
import logging
import os
from typing import Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from app.core.exceptions import ReidTopologyException

logger = logging.getLogger(__name__)


class ConfigException(ReidTopologyException):
    """Исключение для нечитаемых файлов конфигурации"""
    pass


class ForestParams(BaseModel):
    """Гиперпараметры случайного леса"""
    model_config = ConfigDict(frozen=True, extra="forbid")

    n_trees: int = Field(default=50, ge=1)
    max_depth: Optional[int] = Field(default=16, ge=1)
    min_samples_leaf: int = Field(default=2, ge=1)
    # "sqrt" -> sqrt(D) признаков на разбиение, None -> все признаки
    max_features: Optional[Union[Literal["sqrt", "log2"], int, float]] = "sqrt"
    bootstrap: bool = True


class PipelineConfig(BaseModel):
    """
    Параметры совместного вывода топологии и ре-идентификации.

    Имена полей совпадают с ключами файла конфигурации.
    """
    model_config = ConfigDict(frozen=True, extra="forbid")

    theta_sim: float = Field(default=0.7, gt=0.0, lt=1.0)
    theta_conf: float = Field(default=0.4, gt=0.0, lt=1.0)
    initial_window_T: float = Field(default=600.0, gt=0.0)
    quantile_R: float = Field(default=95.0, gt=0.0, lt=100.0)
    bin_width: float = Field(default=2.0, gt=0.0)
    sigma_scale: float = Field(default=60.0, gt=0.0)
    bound_mode: Literal["parametric", "empirical"] = "parametric"
    k_max_zones: int = Field(default=5, ge=1)
    # None - шаг серии равен текущему окну T (слоты не перекрываются)
    series_stride: Optional[float] = Field(default=None, gt=0.0)
    tolerance: float = Field(default=0.01, gt=0.0)
    max_iterations: int = Field(default=10, ge=0)
    seed: int = 0
    forest: ForestParams = Field(default_factory=ForestParams)
    # None - штраф за пропущенную связь считается по плоской аппроксимации
    missing_link_penalty: Optional[float] = Field(default=None, ge=0.0)

    @field_validator("forest", mode="before")
    @classmethod
    def coerce_forest(cls, v):
        if v is None:
            return ForestParams()
        return v

    @model_validator(mode="after")
    def check_window_vs_bins(self) -> "PipelineConfig":
        if self.bin_width >= self.initial_window_T:
            raise ValueError("bin_width должен быть меньше initial_window_T")
        return self

    def stride_for(self, window_T: float) -> float:
        """Шаг серии лесов; по умолчанию T/2, чтобы слот, ближайший к любому моменту, покрывал +-T/4 вокруг него"""
        return self.series_stride if self.series_stride is not None else window_T / 2.0


def load_pipeline_config(path: Optional[str] = None, seed: Optional[int] = None) -> PipelineConfig:
    """
    Загружает конфигурацию конвейера из JSON файла.

    Args:
        path: Путь к файлу; None или "default" - значения по умолчанию
        seed: Переопределение зерна (флаг --seed)

    Returns:
        PipelineConfig: Проверенная конфигурация

    Raises:
        FileNotFoundError: Если файл не существует
        ConfigException: Если файл не является JSON-объектом
        pydantic.ValidationError: Если значения вне допустимых диапазонов
    """
    data = {}
    if path and path != "default":
        if not os.path.exists(path):
            raise FileNotFoundError(f"Файл конфигурации не найден: {path}")
        try:
            with open(path, "r", encoding="utf-8") as f:
                data = json.load(f)
        except ValueError as e:
            raise ConfigException(f"{path}: некорректный JSON: {e}") from e
        if not isinstance(data, dict):
            raise ConfigException(f"{path}: ожидается JSON-объект")
        logger.info(f"Конфигурация конвейера загружена из {path}")
    if seed is not None:
        data["seed"] = seed
    return PipelineConfig(**data)
