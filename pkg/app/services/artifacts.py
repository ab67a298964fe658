"""
Сохранение и загрузка артефактов конвейера в выходной директории
"""
import json
import logging
import os
from typing import Any, Dict, List, Optional

import pandas as pd
from pydantic import BaseModel, ValidationError

from app.core.exceptions import ReidTopologyException
from app.models.forest import ForestSeries
from app.models.topology import CAMERA_LEVEL, Correspondence, TopologyGraph
from app.schemas.report import CorrespondenceRecord, ReidResultFile
from app.services.topology import histogram_frame

logger = logging.getLogger(__name__)

TOPOLOGY_FILE = "topology.json"
CAM_TOPOLOGY_FILE = "cam_topology.json"
TIMINGS_FILE = "timings.json"


class ArtifactStoreException(ReidTopologyException):
    """Исключение для ошибок чтения и записи артефактов"""
    pass


class ArtifactStore:
    """Файлы результатов: топологии, отчеты, соответствия, CSV для графиков"""

    def __init__(self, out_dir: str):
        """
        Args:
            out_dir: Директория для результатов (создается при необходимости)
        """
        self.out_dir = out_dir
        os.makedirs(self.out_dir, exist_ok=True)

    def path(self, name: str) -> str:
        return name if os.path.isabs(name) else os.path.join(self.out_dir, name)

    def save_json(self, data: Any, name: str) -> str:
        """
        Сохраняет данные в JSON (ключи отсортированы, вывод детерминирован)

        Raises:
            ArtifactStoreException: Если запись не удалась
        """
        file_path = self.path(name)
        try:
            os.makedirs(os.path.dirname(file_path) or ".", exist_ok=True)
            with open(file_path, "w", encoding="utf-8") as f:
                json.dump(data, f, ensure_ascii=False, indent=2, sort_keys=True)
                f.write("\n")
        except (OSError, TypeError, ValueError) as e:
            raise ArtifactStoreException(f"Ошибка при сохранении {file_path}: {e}") from e
        logger.info(f"Сохранено: {file_path}")
        return file_path

    def load_json(self, name: str) -> Any:
        """
        Raises:
            FileNotFoundError: Если файл не существует
            ArtifactStoreException: Если файл не является корректным JSON
        """
        file_path = self.path(name)
        if not os.path.exists(file_path):
            raise FileNotFoundError(f"Файл не найден: {file_path}")
        try:
            with open(file_path, "r", encoding="utf-8") as f:
                return json.load(f)
        except ValueError as e:
            raise ArtifactStoreException(f"Ошибка при декодировании JSON в {file_path}: {e}") from e

    def save_model(self, model: BaseModel, name: str) -> str:
        return self.save_json(model.model_dump(mode="json"), name)

    def save_topology(self, graph: TopologyGraph, name: str = TOPOLOGY_FILE) -> str:
        return self.save_json(graph.to_dict(), name)

    def load_topology(self, name: str = TOPOLOGY_FILE) -> TopologyGraph:
        data = self.load_json(name)
        try:
            return TopologyGraph.from_dict(data)
        except (KeyError, TypeError, ValueError) as e:
            raise ArtifactStoreException(f"Некорректный файл топологии {self.path(name)}: {e}") from e

    def save_result(self, stage: str, comparisons: int, correspondences: List[Correspondence], name: str) -> str:
        result = ReidResultFile(
            stage=stage,
            comparisons=comparisons,
            correspondences=[CorrespondenceRecord.from_correspondence(c) for c in correspondences],
        )
        return self.save_model(result, name)

    def load_result(self, name: str) -> ReidResultFile:
        data = self.load_json(name)
        try:
            return ReidResultFile(**data)
        except ValidationError as e:
            raise ArtifactStoreException(f"Некорректный файл результатов {self.path(name)}: {e.errors()[0]['msg']}") from e

    def save_series(self, series: ForestSeries, name: str) -> str:
        return self.save_json(series.to_dict(), name)

    def record_timings(self, timings: Dict[str, float]) -> str:
        """Дописывает время этапов в timings.json (единственный файл с временем выполнения)"""
        current: Dict[str, float] = {}
        if os.path.exists(self.path(TIMINGS_FILE)):
            current = self.load_json(TIMINGS_FILE)
        current.update(timings)
        return self.save_json(current, TIMINGS_FILE)

    def load_timings(self) -> Dict[str, float]:
        if not os.path.exists(self.path(TIMINGS_FILE)):
            return {}
        return {key: float(value) for key, value in self.load_json(TIMINGS_FILE).items()}

    def save_confidence_map(self, graph: TopologyGraph, name: str = "confidence_map.csv") -> Optional[str]:
        """Матрица уверенности связей источник x приемник (CSV)"""
        if not graph.edges:
            return None
        frame = pd.DataFrame(
            [{"source": e.source, "dest": e.dest, "confidence": e.confidence} for e in graph.edges]
        ).pivot(index="source", columns="dest", values="confidence")
        nodes = list(graph.nodes) if graph.level == CAMERA_LEVEL else sorted(set(frame.index) | set(frame.columns))
        frame = frame.reindex(index=nodes, columns=nodes)
        file_path = self.path(name)
        frame.to_csv(file_path, float_format="%.6f")
        logger.info(f"Карта уверенности сохранена: {file_path}")
        return file_path

    def save_histograms(self, graph: TopologyGraph, directory: str = "plots", valid_only: bool = False) -> List[str]:
        """По одному CSV на ребро: бины гистограммы, аппроксимация и итоговая строка"""
        target = self.path(directory)
        os.makedirs(target, exist_ok=True)
        written = []
        for edge in graph.edges:
            if edge.distribution is None or (valid_only and not edge.valid):
                continue
            file_path = os.path.join(target, f"{edge.source}_{edge.dest}.csv")
            histogram_frame(edge.distribution).to_csv(file_path, index=False, float_format="%.9g")
            written.append(file_path)
        logger.info(f"Сохранено CSV гистограмм: {len(written)} в {target}")
        return written
