"""
Разметка синтетического сценария: истинные пары соответствий и истинные связи
"""
from dataclasses import dataclass
from typing import Dict, Set, Tuple

from app.models.observation import TrackRef
from app.models.topology import (
    CAMERA_LEVEL,
    ZONE_LEVEL,
    SearchWindow,
    TopologyEdge,
    TopologyGraph,
    TransitDistribution,
)
from app.models.zone import Zone, camera_of


@dataclass(frozen=True)
class GtCorrespondence:
    """Один успешный переход человека по истинной связи"""
    exit_track: TrackRef
    entry_track: TrackRef
    label: str
    source: str
    dest: str

    @property
    def pair(self) -> Tuple[TrackRef, TrackRef]:
        return (self.exit_track, self.entry_track)

    def to_dict(self) -> dict:
        return {
            "exit_track": list(self.exit_track),
            "entry_track": list(self.entry_track),
            "label": self.label,
            "source": self.source,
            "dest": self.dest,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "GtCorrespondence":
        return cls(
            exit_track=TrackRef(*data["exit_track"]),
            entry_track=TrackRef(*data["entry_track"]),
            label=data["label"],
            source=data["source"],
            dest=data["dest"],
        )


@dataclass(frozen=True)
class GtLink:
    source: str
    dest: str
    mu: float
    sigma: float

    def to_dict(self) -> dict:
        return {"source": self.source, "dest": self.dest, "mu": self.mu, "sigma": self.sigma}

    @classmethod
    def from_dict(cls, data: dict) -> "GtLink":
        return cls(source=data["source"], dest=data["dest"], mu=float(data["mu"]), sigma=float(data["sigma"]))


def parametric_distribution(source: str, dest: str, mu: float, sigma: float) -> TransitDistribution:
    """Распределение, заданное только гауссианой (гистограмма из одного бина +-4 sigma)"""
    return TransitDistribution(
        source=source,
        dest=dest,
        bin_edges=(mu - 4 * sigma, mu + 4 * sigma),
        masses=(1.0,),
        mu=mu,
        sigma=sigma,
        fit_error=0.0,
        confidence=1.0,
        support=0,
    )


@dataclass(frozen=True)
class GroundTruth:
    correspondences: Tuple[GtCorrespondence, ...]
    links: Tuple[GtLink, ...]
    zones: Tuple[Zone, ...] = ()

    @property
    def pairs(self) -> Set[Tuple[TrackRef, TrackRef]]:
        return {c.pair for c in self.correspondences}

    def __len__(self) -> int:
        return len(self.correspondences)

    def topology(self) -> TopologyGraph:
        """Истинный граф Zone-to-Zone"""
        edges = tuple(
            TopologyEdge(
                source=link.source,
                dest=link.dest,
                window=SearchWindow.centered(link.mu, 4 * link.sigma),
                distribution=parametric_distribution(link.source, link.dest, link.mu, link.sigma),
                valid=True,
            )
            for link in sorted(self.links, key=lambda l: (l.source, l.dest))
        )
        nodes = sorted({z.node_id for z in self.zones} | {l.source for l in self.links} | {l.dest for l in self.links})
        return TopologyGraph(level=ZONE_LEVEL, nodes=tuple(nodes), edges=edges, zones=self.zones)

    def camera_links(self) -> Set[Tuple[str, str]]:
        return {(camera_of(link.source), camera_of(link.dest)) for link in self.links}

    def camera_topology(self) -> TopologyGraph:
        """Проекция истинных связей на пары камер (без распределений)"""
        cameras = sorted({camera_of(z.node_id) for z in self.zones} | {c for pair in self.camera_links() for c in pair})
        edges = tuple(
            TopologyEdge(source=a, dest=b, window=SearchWindow.two_sided(1.0), valid=True)
            for a, b in sorted(self.camera_links())
        )
        return TopologyGraph(level=CAMERA_LEVEL, nodes=tuple(cameras), edges=edges)

    def by_label(self) -> Dict[str, int]:
        counts: Dict[str, int] = {}
        for c in self.correspondences:
            counts[c.label] = counts.get(c.label, 0) + 1
        return counts

    def to_dict(self) -> dict:
        return {
            "correspondences": [c.to_dict() for c in self.correspondences],
            "links": [l.to_dict() for l in self.links],
            "zones": [z.to_dict() for z in self.zones],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "GroundTruth":
        return cls(
            correspondences=tuple(GtCorrespondence.from_dict(c) for c in data.get("correspondences", [])),
            links=tuple(GtLink.from_dict(l) for l in data.get("links", [])),
            zones=tuple(Zone.from_dict(z) for z in data.get("zones", [])),
        )
