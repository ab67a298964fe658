"""
Базовые типы потока событий: дескрипторы, наблюдения и треки людей
"""
from dataclasses import dataclass, field, replace
from typing import Iterable, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from app.core.exceptions import ReidTopologyException

_UNIT_TOLERANCE = 1e-12

Point = Tuple[float, float]


class CoreTypeException(ReidTopologyException, ValueError):
    """Нарушение инвариантов базовых типов"""
    pass


@dataclass(frozen=True, eq=False)
class FeatureVector:
    """
    Неотрицательный дескриптор внешности единичной L2-нормы.

    Нормализация выполняется при создании, поэтому повторное
    создание из уже нормированного вектора ничего не меняет.
    """
    values: np.ndarray

    def __post_init__(self):
        raw = np.asarray(self.values, dtype=np.float64).reshape(-1)
        if raw.size == 0:
            raise CoreTypeException("Дескриптор не может быть пустым")
        if not np.all(np.isfinite(raw)):
            raise CoreTypeException("Дескриптор содержит нечисловые значения")
        if np.any(raw < 0):
            raise CoreTypeException("Дескриптор содержит отрицательные значения")
        norm = float(np.linalg.norm(raw))
        if norm == 0.0:
            raise CoreTypeException("Дескриптор не может быть нулевым")
        # Уже единичный вектор не делится: деление меняет младшие биты
        unit = raw.copy() if abs(norm - 1.0) <= _UNIT_TOLERANCE else raw / norm
        unit.setflags(write=False)
        object.__setattr__(self, "values", unit)

    @property
    def dimension(self) -> int:
        return int(self.values.size)

    def __eq__(self, other) -> bool:
        if not isinstance(other, FeatureVector):
            return NotImplemented
        return self.values.shape == other.values.shape and bool(np.array_equal(self.values, other.values))

    def __hash__(self) -> int:
        return hash(self.values.tobytes())

    def to_list(self) -> list:
        return [float(x) for x in self.values]


def _check_point(point: Sequence[float], what: str) -> Point:
    x, y = float(point[0]), float(point[1])
    if not (0.0 <= x <= 1.0 and 0.0 <= y <= 1.0):
        raise CoreTypeException(f"{what} вне [0,1]^2: ({x}, {y})")
    return (x, y)


@dataclass(frozen=True)
class Observation:
    """Одно появление человека в кадре камеры"""
    camera: str
    time: float
    position: Point
    feature: FeatureVector

    def __post_init__(self):
        if not np.isfinite(self.time) or self.time < 0:
            raise CoreTypeException(f"Время наблюдения должно быть >= 0, получено {self.time}")
        object.__setattr__(self, "time", float(self.time))
        object.__setattr__(self, "position", _check_point(self.position, "Позиция наблюдения"))


class TrackRef(NamedTuple):
    """Идентичность трека: (камера, время входа, порядковый номер в потоке)"""
    camera: str
    entry_time: float
    seq: int

    @property
    def key(self) -> str:
        # Номер дополнен нулями, чтобы строковый порядок совпадал с числовым
        return f"{self.camera}/{self.seq:07d}"


@dataclass(frozen=True)
class PersonTrack:
    """
    Трек человека внутри одной камеры.

    label - идентичность из разметки; в "слепом" режиме отсутствует и
    используется только при оценке качества.
    """
    camera: str
    observations: Tuple[Observation, ...]
    seq: int = 0
    label: Optional[str] = None
    features: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        observations = tuple(self.observations)
        if not observations:
            raise CoreTypeException("Трек должен содержать хотя бы одно наблюдение")
        for prev, cur in zip(observations, observations[1:]):
            if not cur.time > prev.time:
                raise CoreTypeException(
                    f"Наблюдения трека должны строго возрастать по времени: {prev.time} -> {cur.time}"
                )
        for obs in observations:
            if obs.camera != self.camera:
                raise CoreTypeException(
                    f"Наблюдение камеры {obs.camera} в треке камеры {self.camera}"
                )
        dims = {obs.feature.dimension for obs in observations}
        if len(dims) != 1:
            raise CoreTypeException(f"Разная размерность дескрипторов в треке: {sorted(dims)}")
        object.__setattr__(self, "observations", observations)
        matrix = np.vstack([obs.feature.values for obs in observations])
        matrix.setflags(write=False)
        object.__setattr__(self, "features", matrix)

    @property
    def entry_time(self) -> float:
        return self.observations[0].time

    @property
    def exit_time(self) -> float:
        return self.observations[-1].time

    @property
    def entry_point(self) -> Point:
        return self.observations[0].position

    @property
    def exit_point(self) -> Point:
        return self.observations[-1].position

    @property
    def ref(self) -> TrackRef:
        return TrackRef(self.camera, self.entry_time, self.seq)

    @property
    def dimension(self) -> int:
        return int(self.features.shape[1])

    def __len__(self) -> int:
        return len(self.observations)

    def with_label(self, label: Optional[str]) -> "PersonTrack":
        return replace(self, label=label)

    def as_gallery(self) -> "PersonTrack":
        """Копия трека с меткой галереи: классификатор различает треки, а не людей"""
        return replace(self, label=self.ref.key)


def tracks_by_camera(stream: Iterable[PersonTrack]) -> dict:
    """Группирует треки по камерам, сохраняя порядок потока"""
    grouped: dict = {}
    for track in stream:
        grouped.setdefault(track.camera, []).append(track)
    return grouped


def blind(stream: Iterable[PersonTrack]) -> list:
    """Убирает метки разметки из потока"""
    return [track.with_label(None) for track in stream]
