"""
Схемы отчетов конвейера, файлов результатов и файла метрик
"""
from typing import Dict, List, Optional

from pydantic import BaseModel, ConfigDict

from app.models.observation import TrackRef
from app.models.topology import Correspondence, TopologyEdge


class EdgeReport(BaseModel):
    """Итоговые параметры одного ребра"""
    source: str
    dest: str
    valid: bool
    retained: bool = False
    mu: Optional[float] = None
    sigma: Optional[float] = None
    fit_error: Optional[float] = None
    confidence: float = 0.0
    support: int = 0
    discarded: int = 0
    T: float
    T_L: Optional[float] = None
    T_U: Optional[float] = None

    @classmethod
    def from_edge(cls, edge: TopologyEdge) -> "EdgeReport":
        dist = edge.distribution
        return cls(
            source=edge.source,
            dest=edge.dest,
            valid=edge.valid,
            retained=edge.retained,
            mu=dist.mu if dist else None,
            sigma=dist.sigma if dist else None,
            fit_error=dist.fit_error if dist else None,
            confidence=edge.confidence,
            support=dist.support if dist else 0,
            discarded=dist.discarded if dist else 0,
            T=edge.window.T,
            T_L=edge.window.T_L,
            T_U=edge.window.T_U,
        )


class StageReport(BaseModel):
    stage: str
    edges_examined: int
    valid_edges: int
    correspondences: int
    reliable: int
    comparisons: int
    convergence: Optional[float] = None
    accuracy: Optional[float] = None
    accuracy_reliable: Optional[float] = None
    transitions: List[str] = []


class CorrespondenceRecord(BaseModel):
    exit_camera: str
    exit_entry_time: float
    exit_seq: int
    matched_camera: str
    matched_entry_time: float
    matched_seq: int
    similarity: float
    delta_t: float
    source: str
    dest: str

    @classmethod
    def from_correspondence(cls, c: Correspondence) -> "CorrespondenceRecord":
        return cls(
            exit_camera=c.exit_track.camera,
            exit_entry_time=c.exit_track.entry_time,
            exit_seq=c.exit_track.seq,
            matched_camera=c.matched_track.camera,
            matched_entry_time=c.matched_track.entry_time,
            matched_seq=c.matched_track.seq,
            similarity=c.similarity,
            delta_t=c.delta_t,
            source=c.source,
            dest=c.dest,
        )

    def to_correspondence(self) -> Correspondence:
        return Correspondence(
            exit_track=TrackRef(self.exit_camera, self.exit_entry_time, self.exit_seq),
            matched_track=TrackRef(self.matched_camera, self.matched_entry_time, self.matched_seq),
            similarity=self.similarity,
            delta_t=self.delta_t,
            source=self.source,
            dest=self.dest,
        )


class ReidResultFile(BaseModel):
    """Результат ре-идентификации одного этапа (вход для evaluate)"""
    stage: str
    comparisons: int
    correspondences: List[CorrespondenceRecord]


class PipelineReport(BaseModel):
    """
    Отчет обучающего или тестового этапа.

    Не содержит времени выполнения, поэтому при фиксированном зерне
    повторный запуск дает идентичный файл.
    """
    model_config = ConfigDict(extra="forbid")

    stage: str
    seed: int
    iterations: int = 0
    comparisons: int = 0
    stages: List[StageReport] = []
    cam_edges: List[EdgeReport] = []
    zone_edges: List[EdgeReport] = []
    correspondences: List[CorrespondenceRecord] = []


class MetricsReport(BaseModel):
    reid_accuracy: Optional[float] = None
    reid_accuracy_reliable: Optional[float] = None
    topology_distance_matched: Optional[float] = None
    topology_distance_penalized: Optional[float] = None
    link_precision: Optional[float] = None
    link_recall: Optional[float] = None
    matched_links: int = 0
    missing_links: int = 0
    comparisons: Optional[int] = None
    wall_time_seconds: Dict[str, float] = {}
