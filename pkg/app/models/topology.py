"""
Граф топологии сети камер и связанные с ним типы
"""
from dataclasses import dataclass, field, replace
from typing import Dict, Iterable, List, Optional, Tuple

import numpy as np

from app.models.observation import CoreTypeException, TrackRef
from app.models.zone import Zone, camera_of

CAMERA_LEVEL = "camera"
ZONE_LEVEL = "zone"

EdgeKey = Tuple[str, str]


@dataclass(frozen=True)
class TransitDistribution:
    """
    Распределение времени перехода p(dt) для направленной пары узлов:
    нормированная гистограмма и аппроксимирующая ее гауссиана.
    """
    source: str
    dest: str
    bin_edges: Tuple[float, ...]
    masses: Tuple[float, ...]
    mu: float
    sigma: float
    fit_error: float
    confidence: float
    support: int
    discarded: int = 0
    degenerate: bool = False
    # Высота аппроксимирующей кривой a*exp(-(x-mu)^2/(2 sigma^2)); None - задана только гауссиана
    amplitude: Optional[float] = None

    def __post_init__(self):
        if len(self.bin_edges) != len(self.masses) + 1:
            raise CoreTypeException("Число границ бинов должно быть на единицу больше числа бинов")
        if self.sigma <= 0:
            raise CoreTypeException(f"sigma должна быть > 0, получено {self.sigma}")
        if not (0.0 <= self.fit_error <= 1.0) or not (0.0 <= self.confidence <= 1.0):
            raise CoreTypeException("Ошибка аппроксимации и уверенность должны лежать в [0,1]")
        if self.support > 0 and abs(sum(self.masses) - 1.0) > 1e-9:
            raise CoreTypeException(f"Массы гистограммы {self.source}->{self.dest} не нормированы")

    @property
    def bin_centers(self) -> np.ndarray:
        edges = np.asarray(self.bin_edges)
        return (edges[:-1] + edges[1:]) / 2.0

    def to_dict(self) -> dict:
        return {
            "source": self.source,
            "dest": self.dest,
            "bin_edges": list(self.bin_edges),
            "masses": list(self.masses),
            "mu": self.mu,
            "sigma": self.sigma,
            "fit_error": self.fit_error,
            "confidence": self.confidence,
            "support": self.support,
            "discarded": self.discarded,
            "degenerate": self.degenerate,
            "amplitude": self.amplitude,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TransitDistribution":
        return cls(
            source=data["source"],
            dest=data["dest"],
            bin_edges=tuple(float(x) for x in data["bin_edges"]),
            masses=tuple(float(x) for x in data["masses"]),
            mu=float(data["mu"]),
            sigma=float(data["sigma"]),
            fit_error=float(data["fit_error"]),
            confidence=float(data["confidence"]),
            support=int(data["support"]),
            discarded=int(data.get("discarded", 0)),
            degenerate=bool(data.get("degenerate", False)),
            amplitude=None if data.get("amplitude") is None else float(data["amplitude"]),
        )


@dataclass(frozen=True)
class SearchWindow:
    """
    Окно поиска соответствий в терминах dt = вход - выход.

    target_offset - сдвиг момента, по которому выбирается лес серии:
    0 до появления аппроксимации, mu после нее.
    """
    lo: float
    hi: float
    T: float
    T_L: Optional[float] = None
    T_U: Optional[float] = None
    target_offset: float = 0.0

    def __post_init__(self):
        if not self.hi > self.lo:
            raise CoreTypeException(f"Пустое окно поиска [{self.lo}, {self.hi}]")
        if self.T <= 0:
            raise CoreTypeException(f"Ширина окна T должна быть > 0, получено {self.T}")

    @classmethod
    def two_sided(cls, T: float) -> "SearchWindow":
        """[t-T, t+T] для CAM-to-CAM"""
        return cls(lo=-T, hi=T, T=T)

    @classmethod
    def one_sided(cls, T: float) -> "SearchWindow":
        """[t, t+T] для Zone-to-Zone"""
        return cls(lo=0.0, hi=T, T=T)

    @classmethod
    def centered(cls, mu: float, T: float, T_L: Optional[float] = None, T_U: Optional[float] = None) -> "SearchWindow":
        """Окно ширины T вокруг ожидаемого появления t+mu"""
        return cls(lo=mu - T / 2.0, hi=mu + T / 2.0, T=T, T_L=T_L, T_U=T_U, target_offset=mu)

    def contains(self, delta_t: float) -> bool:
        return self.lo <= delta_t <= self.hi

    def to_dict(self) -> dict:
        return {
            "lo": self.lo, "hi": self.hi, "T": self.T,
            "T_L": self.T_L, "T_U": self.T_U, "target_offset": self.target_offset,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SearchWindow":
        return cls(
            lo=float(data["lo"]), hi=float(data["hi"]), T=float(data["T"]),
            T_L=data.get("T_L"), T_U=data.get("T_U"),
            target_offset=float(data.get("target_offset", 0.0)),
        )


@dataclass(frozen=True)
class Correspondence:
    """Найденная пара: трек, покинувший камеру A, и его совпадение в камере B"""
    exit_track: TrackRef
    matched_track: TrackRef
    similarity: float
    delta_t: float
    source: str = ""
    dest: str = ""

    @property
    def pair(self) -> Tuple[TrackRef, TrackRef]:
        return (self.exit_track, self.matched_track)

    def to_dict(self) -> dict:
        return {
            "exit_track": list(self.exit_track),
            "matched_track": list(self.matched_track),
            "similarity": self.similarity,
            "delta_t": self.delta_t,
            "source": self.source,
            "dest": self.dest,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Correspondence":
        return cls(
            exit_track=TrackRef(*data["exit_track"]),
            matched_track=TrackRef(*data["matched_track"]),
            similarity=float(data["similarity"]),
            delta_t=float(data["delta_t"]),
            source=data.get("source", ""),
            dest=data.get("dest", ""),
        )


@dataclass(frozen=True)
class TopologyEdge:
    source: str
    dest: str
    window: SearchWindow
    distribution: Optional[TransitDistribution] = None
    valid: bool = False
    retained: bool = False

    @property
    def key(self) -> EdgeKey:
        return (self.source, self.dest)

    @property
    def confidence(self) -> float:
        return self.distribution.confidence if self.distribution is not None else 0.0

    def to_dict(self) -> dict:
        return {
            "source": self.source,
            "dest": self.dest,
            "window": self.window.to_dict(),
            "distribution": self.distribution.to_dict() if self.distribution else None,
            "valid": self.valid,
            "retained": self.retained,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TopologyEdge":
        dist = data.get("distribution")
        return cls(
            source=data["source"],
            dest=data["dest"],
            window=SearchWindow.from_dict(data["window"]),
            distribution=TransitDistribution.from_dict(dist) if dist else None,
            valid=bool(data["valid"]),
            retained=bool(data.get("retained", False)),
        )


@dataclass(frozen=True)
class TopologyGraph:
    """
    Граф G=(V,E): вершины - камеры или зоны, ребра - направленные
    связи с распределением перехода, флагом валидности и окном поиска.
    """
    level: str
    nodes: Tuple[str, ...]
    edges: Tuple[TopologyEdge, ...] = ()
    zones: Tuple[Zone, ...] = ()
    _index: Dict[EdgeKey, TopologyEdge] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.level not in (CAMERA_LEVEL, ZONE_LEVEL):
            raise CoreTypeException(f"Неизвестный уровень графа: {self.level}")
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(self, "edges", tuple(self.edges))
        object.__setattr__(self, "zones", tuple(self.zones))
        index = {}
        for edge in self.edges:
            if edge.key in index:
                raise CoreTypeException(f"Ребро {edge.key} задано дважды")
            if self.level == ZONE_LEVEL and camera_of(edge.source) == camera_of(edge.dest):
                raise CoreTypeException(f"Ребро между зонами одной камеры: {edge.key}")
            index[edge.key] = edge
        object.__setattr__(self, "_index", index)

    def edge(self, source: str, dest: str) -> Optional[TopologyEdge]:
        return self._index.get((source, dest))

    def valid_edges(self) -> List[TopologyEdge]:
        return [edge for edge in self.edges if edge.valid]

    def valid_keys(self) -> set:
        return {edge.key for edge in self.edges if edge.valid}

    def with_edges(self, edges: Iterable[TopologyEdge]) -> "TopologyGraph":
        """Новый граф, в котором указанные ребра заменены или добавлены"""
        merged = dict(self._index)
        for edge in edges:
            merged[edge.key] = edge
        return replace(self, edges=tuple(merged[key] for key in sorted(merged)))

    def zone(self, node_id: str, kind: str) -> Optional[Zone]:
        for zone in self.zones:
            if zone.node_id == node_id and zone.kind == kind:
                return zone
        return None

    def to_dict(self) -> dict:
        return {
            "level": self.level,
            "nodes": list(self.nodes),
            "edges": [edge.to_dict() for edge in self.edges],
            "zones": [zone.to_dict() for zone in self.zones],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TopologyGraph":
        return cls(
            level=data["level"],
            nodes=tuple(data["nodes"]),
            edges=tuple(TopologyEdge.from_dict(e) for e in data.get("edges", [])),
            zones=tuple(Zone.from_dict(z) for z in data.get("zones", [])),
        )
