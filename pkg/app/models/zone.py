"""
Зоны входа и выхода внутри поля зрения камеры
"""
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from app.models.observation import CoreTypeException, Point

ENTRY = "entry"
EXIT = "exit"


@dataclass(frozen=True)
class Zone:
    """Гауссова область кадра, где треки начинаются (entry) или заканчиваются (exit)"""
    camera: str
    zone_id: int
    kind: str
    centroid: Point
    spread: Tuple[Tuple[float, float], Tuple[float, float]]

    def __post_init__(self):
        if self.kind not in (ENTRY, EXIT):
            raise CoreTypeException(f"Неизвестный тип зоны: {self.kind}")
        cov = np.asarray(self.spread, dtype=np.float64)
        if cov.shape != (2, 2):
            raise CoreTypeException(f"Ковариация зоны должна быть 2x2, получено {cov.shape}")
        # Симметризуем, чтобы погрешности EM не ломали инвариант
        cov = (cov + cov.T) / 2.0
        if np.any(np.linalg.eigvalsh(cov) <= 0):
            raise CoreTypeException(f"Ковариация зоны {self.node_id} не положительно определена")
        object.__setattr__(self, "spread", ((float(cov[0, 0]), float(cov[0, 1])), (float(cov[1, 0]), float(cov[1, 1]))))
        object.__setattr__(self, "centroid", (float(self.centroid[0]), float(self.centroid[1])))

    @property
    def node_id(self) -> str:
        return zone_node_id(self.camera, self.zone_id)

    @property
    def covariance(self) -> np.ndarray:
        return np.asarray(self.spread, dtype=np.float64)

    def to_dict(self) -> dict:
        return {
            "camera": self.camera,
            "zone_id": self.zone_id,
            "kind": self.kind,
            "centroid": list(self.centroid),
            "spread": [list(row) for row in self.spread],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Zone":
        return cls(
            camera=data["camera"],
            zone_id=int(data["zone_id"]),
            kind=data["kind"],
            centroid=tuple(data["centroid"]),
            spread=tuple(tuple(row) for row in data["spread"]),
        )


def zone_node_id(camera: str, zone_id: int) -> str:
    return f"{camera}Z{zone_id}"


def camera_of(node_id: str) -> str:
    """Камера узла графа: 'C3Z2' -> 'C3', 'C3' -> 'C3'"""
    head, sep, _ = node_id.rpartition("Z")
    return head if sep and head else node_id
