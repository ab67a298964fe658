"""
Схема сценария синтетической сети камер
"""
from collections import defaultdict
from typing import List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, model_validator

from app.models.zone import zone_node_id


class ZoneLayout(BaseModel):
    """Физическая зона (проход) в кадре: служит и входом, и выходом"""
    model_config = ConfigDict(frozen=True, extra="forbid")

    zone_id: int = Field(ge=1)
    centroid: Tuple[float, float]
    spread: float = Field(default=0.03, gt=0.0)

    @model_validator(mode="after")
    def check_centroid(self) -> "ZoneLayout":
        x, y = self.centroid
        if not (0.0 <= x <= 1.0 and 0.0 <= y <= 1.0):
            raise ValueError(f"Центр зоны {self.zone_id} вне [0,1]^2")
        return self


class CameraLayout(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    camera: str
    zones: List[ZoneLayout]
    # Переопределение шума дескрипторов для дальней камеры
    noise: Optional[float] = Field(default=None, ge=0.0)

    @model_validator(mode="after")
    def check_zones(self) -> "CameraLayout":
        if not self.zones:
            raise ValueError(f"У камеры {self.camera} нет зон")
        ids = [zone.zone_id for zone in self.zones]
        if len(ids) != len(set(ids)):
            raise ValueError(f"Повторяющиеся номера зон у камеры {self.camera}")
        if "Z" in self.camera:
            raise ValueError(f"Имя камеры не должно содержать 'Z': {self.camera}")
        return self


class LinkLaw(BaseModel):
    """Истинная связь выход -> вход с законом перехода N(mu, sigma^2)"""
    model_config = ConfigDict(frozen=True, extra="forbid")

    source_camera: str
    source_zone: int
    dest_camera: str
    dest_zone: int
    mu: float
    sigma: float = Field(gt=0.0)
    probability: float = Field(default=0.9, gt=0.0, le=1.0)

    @property
    def source(self) -> str:
        return zone_node_id(self.source_camera, self.source_zone)

    @property
    def dest(self) -> str:
        return zone_node_id(self.dest_camera, self.dest_zone)


class ScenarioSpec(BaseModel):
    """
    Описание сценария: раскладка камер и зон, истинные связи,
    популяция людей и параметры генерации.
    """
    model_config = ConfigDict(frozen=True, extra="forbid")

    cameras: List[CameraLayout]
    gt_links: List[LinkLaw]
    identities: int = Field(default=300, ge=1)
    dimension: int = Field(default=64, ge=2)
    noise: float = Field(default=0.05, ge=0.0)
    distractor_fraction: float = Field(default=0.3, ge=0.0, le=1.0)
    duration: float = Field(default=3600.0, gt=0.0)
    # None - моменты появления равномерны на [0, duration)
    arrival_rate: Optional[float] = Field(default=None, gt=0.0)
    dwell_range: Tuple[float, float] = (10.0, 60.0)
    observation_interval: float = Field(default=2.0, gt=0.0)
    # Вероятность выбрать выход, у которого есть связь, вместо граничного
    link_preference: float = Field(default=1.0, ge=0.0, le=1.0)
    # Люди входят в сеть через зоны, в которые не ведет ни одна связь
    start_at_boundary: bool = True
    max_hops: int = Field(default=8, ge=1)
    allow_negative_transit: bool = False
    seed: int = 0

    @model_validator(mode="after")
    def check_links(self) -> "ScenarioSpec":
        lo, hi = self.dwell_range
        if not 0 < lo <= hi:
            raise ValueError(f"Некорректный диапазон пребывания: {self.dwell_range}")
        names = [camera.camera for camera in self.cameras]
        if len(names) != len(set(names)):
            raise ValueError("Повторяющиеся имена камер")
        zones = {camera.camera: {zone.zone_id for zone in camera.zones} for camera in self.cameras}
        outgoing = defaultdict(float)
        seen = set()
        for link in self.gt_links:
            for camera, zone in ((link.source_camera, link.source_zone), (link.dest_camera, link.dest_zone)):
                if zone not in zones.get(camera, set()):
                    raise ValueError(f"Связь ссылается на неизвестную зону {zone_node_id(camera, zone)}")
            if link.source_camera == link.dest_camera:
                raise ValueError(f"Связь внутри одной камеры: {link.source}->{link.dest}")
            if (link.source, link.dest) in seen:
                raise ValueError(f"Связь задана дважды: {link.source}->{link.dest}")
            seen.add((link.source, link.dest))
            outgoing[link.source] += link.probability
        for source, total in outgoing.items():
            if total > 1.0 + 1e-12:
                raise ValueError(f"Сумма вероятностей переходов из {source} больше 1: {total}")
        return self

    def camera(self, name: str) -> CameraLayout:
        for camera in self.cameras:
            if camera.camera == name:
                return camera
        raise KeyError(name)

    def links_from(self, node_id: str) -> List[LinkLaw]:
        return [link for link in self.gt_links if link.source == node_id]

