"""
Генератор синтетической сети камер и потока треков пешеходов
с известной истинной топологией.
"""
import json
import logging
import os
from dataclasses import dataclass, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from app.core.exceptions import ReidTopologyException
from app.models.ground_truth import GroundTruth, GtCorrespondence, GtLink
from app.models.observation import FeatureVector, Observation, PersonTrack, TrackRef
from app.models.zone import ENTRY, EXIT, Zone, zone_node_id
from app.schemas.scenario import CameraLayout, LinkLaw, ScenarioSpec, ZoneLayout
from app.utils.random import make_rng

logger = logging.getLogger(__name__)

# Положения проходов в кадре по номеру зоны
_ZONE_CATALOGUE = {
    1: (0.08, 0.50),
    2: (0.92, 0.50),
    3: (0.50, 0.08),
    4: (0.50, 0.92),
    5: (0.15, 0.15),
    6: (0.85, 0.85),
}

# (камера, зоны)
_DEFAULT_LAYOUT = (
    ("C1", (1, 2)),
    ("C2", (1, 2, 5)),
    ("C3", (1, 2, 3, 4)),
    ("C4", (1, 4)),
    ("C5", (1, 2, 6)),
    ("C6", (1, 2)),
    ("C7", (1, 2, 3)),
    ("C8", (1, 2, 3)),
    ("C9", (1, 2)),
)

# Истинные связи выход -> вход: (mu_gt, sigma_gt) в секундах
_DEFAULT_LINKS = (
    ("C1", 1, "C2", 5, 34.7, 6.04),
    ("C2", 5, "C1", 1, 40.4, 5.93),
    ("C2", 2, "C3", 1, 36.3, 5.79),
    ("C3", 1, "C2", 2, 37.0, 8.90),
    ("C3", 2, "C5", 6, -0.57, 3.23),
    ("C5", 6, "C3", 2, 1.59, 2.32),
    ("C3", 3, "C7", 3, 4.3, 3.5),
    ("C7", 3, "C3", 3, 4.68, 3.04),
    ("C4", 4, "C5", 2, 30.1, 12.5),
    ("C5", 2, "C4", 4, 28.6, 14.8),
    ("C7", 1, "C8", 2, 28.4, 6.36),
    ("C8", 2, "C7", 1, 30.0, 4.02),
    ("C8", 1, "C9", 2, 11.7, 4.24),
    ("C9", 2, "C8", 1, 10.5, 4.08),
)

_MAX_RESAMPLES = 1000


class ScenarioException(ReidTopologyException):
    """Исключение для некорректных сценариев и ошибок генерации"""
    pass


def default_scenario() -> ScenarioSpec:
    """
    Сценарий по умолчанию: 9 камер и 14 направленных связей Zone-to-Zone.

    Связь C3Z2 -> C5Z6 имеет отрицательное среднее (перекрывающиеся виды);
    при allow_negative_transit=False отрицательные dt перевыбираются, так что
    фактический закон этой связи - усеченная гауссиана.
    """
    cameras = [
        CameraLayout(
            camera=name,
            zones=[ZoneLayout(zone_id=z, centroid=_ZONE_CATALOGUE[z], spread=0.03) for z in zones],
        )
        for name, zones in _DEFAULT_LAYOUT
    ]
    links = [
        LinkLaw(source_camera=a, source_zone=za, dest_camera=b, dest_zone=zb, mu=mu, sigma=sigma, probability=1.0)
        for a, za, b, zb, mu, sigma in _DEFAULT_LINKS
    ]
    return ScenarioSpec(cameras=cameras, gt_links=links, identities=300, dimension=64, duration=3600.0)


def load_scenario(path: Optional[str] = None, seed: Optional[int] = None) -> ScenarioSpec:
    """
    Загружает сценарий из JSON; "default" или None - сценарий по умолчанию.

    Raises:
        FileNotFoundError: Если файл не существует
        ScenarioException: Если файл не является JSON-объектом
        pydantic.ValidationError: Если сценарий некорректен
    """
    if not path or path == "default":
        spec = default_scenario()
    else:
        if not os.path.exists(path):
            raise FileNotFoundError(f"Файл сценария не найден: {path}")
        try:
            with open(path, "r", encoding="utf-8") as f:
                data = json.load(f)
        except ValueError as e:
            raise ScenarioException(f"{path}: некорректный JSON: {e}") from e
        if not isinstance(data, dict):
            raise ScenarioException(f"{path}: ожидается JSON-объект")
        spec = ScenarioSpec(**data)
        logger.info(f"Сценарий загружен из {path}: {len(spec.cameras)} камер, {len(spec.gt_links)} связей")
    if seed is not None:
        spec = spec.model_copy(update={"seed": seed})
    return spec


def scenario_zones(spec: ScenarioSpec) -> Tuple[Zone, ...]:
    """Зоны сценария в обоих ролях (вход и выход)"""
    zones = []
    for camera in spec.cameras:
        for layout in camera.zones:
            cov = ((layout.spread ** 2, 0.0), (0.0, layout.spread ** 2))
            for kind in (ENTRY, EXIT):
                zones.append(Zone(camera=camera.camera, zone_id=layout.zone_id, kind=kind,
                                  centroid=layout.centroid, spread=cov))
    return tuple(zones)


def sample_transit(link: LinkLaw, rng: np.random.Generator, allow_negative: bool) -> float:
    """Время перехода по связи; без allow_negative отрицательные значения перевыбираются"""
    for _ in range(_MAX_RESAMPLES):
        dt = float(rng.normal(link.mu, link.sigma))
        if allow_negative or dt >= 0.0:
            return dt
    raise ScenarioException(f"Не удалось получить dt >= 0 для связи {link.source}->{link.dest}")


@dataclass
class _RawTrack:
    label: str
    camera: str
    entry_zone: int
    exit_zone: int
    t_in: float
    t_out: float
    observations: Tuple[Observation, ...]


class ScenarioSimulator:
    """Случайные блуждания людей по графу истинных связей"""

    def __init__(self, spec: ScenarioSpec):
        self.spec = spec
        self._layouts = {camera.camera: camera for camera in spec.cameras}
        self._zone_layouts = {
            (camera.camera, zone.zone_id): zone for camera in spec.cameras for zone in camera.zones
        }

    def _arrival_times(self) -> np.ndarray:
        rng = make_rng(self.spec.seed, "arrivals")
        if self.spec.arrival_rate is None:
            return np.sort(rng.uniform(0.0, self.spec.duration, self.spec.identities))
        times = []
        t = 0.0
        while len(times) < self.spec.identities:
            t += float(rng.exponential(1.0 / self.spec.arrival_rate))
            if t >= self.spec.duration:
                break
            times.append(t)
        return np.asarray(times)

    def _distractors(self, count: int) -> np.ndarray:
        rng = make_rng(self.spec.seed, "distractors")
        flags = np.zeros(count, dtype=bool)
        n_distractors = int(round(self.spec.distractor_fraction * count))
        flags[rng.permutation(count)[:n_distractors]] = True
        return flags

    def _point(self, camera: str, zone_id: int, rng: np.random.Generator) -> np.ndarray:
        layout = self._zone_layouts[(camera, zone_id)]
        point = rng.normal(layout.centroid, layout.spread)
        return np.clip(point, 0.0, 1.0)

    def _feature(self, canonical: np.ndarray, noise: float, rng: np.random.Generator) -> FeatureVector:
        if noise == 0.0:
            return FeatureVector(canonical)
        noisy = np.clip(canonical + rng.normal(0.0, noise, canonical.shape), 0.0, None)
        if not np.any(noisy > 0):
            noisy = canonical
        return FeatureVector(noisy)

    def _entry_zone(self, camera: CameraLayout, rng) -> int:
        zones = [zone.zone_id for zone in camera.zones]
        if self.spec.start_at_boundary:
            incoming = {link.dest_zone for link in self.spec.gt_links if link.dest_camera == camera.camera}
            zones = [z for z in zones if z not in incoming] or zones
        return int(rng.choice(zones))

    def _choose_exit(self, camera: CameraLayout, entry_zone: int, distractor: bool, rng) -> int:
        others = [zone.zone_id for zone in camera.zones if zone.zone_id != entry_zone]
        if not others:
            return entry_zone
        linked = [z for z in others if self.spec.links_from(zone_node_id(camera.camera, z))]
        boundary = [z for z in others if z not in linked]
        if not distractor and linked and (not boundary or rng.random() < self.spec.link_preference):
            return int(rng.choice(linked))
        pool = boundary or others
        return int(rng.choice(pool))

    def _choose_link(self, camera: str, exit_zone: int, rng) -> Optional[LinkLaw]:
        u = rng.random()
        acc = 0.0
        for link in self.spec.links_from(zone_node_id(camera, exit_zone)):
            acc += link.probability
            if u < acc:
                return link
        return None

    def _track(self, label, camera, entry_zone, exit_zone, t_in, dwell, canonical, rng) -> _RawTrack:
        spec = self.spec
        layout = self._layouts[camera]
        noise = layout.noise if layout.noise is not None else spec.noise
        t_out = t_in + dwell
        count = max(2, int(dwell // spec.observation_interval) + 1)
        times = np.linspace(t_in, t_out, count)
        start = self._point(camera, entry_zone, rng)
        end = self._point(camera, exit_zone, rng)
        observations = []
        for k, t in enumerate(times):
            w = k / (count - 1)
            position = np.clip((1.0 - w) * start + w * end, 0.0, 1.0)
            observations.append(Observation(
                camera=camera,
                time=float(t),
                position=(float(position[0]), float(position[1])),
                feature=self._feature(canonical, noise, rng),
            ))
        return _RawTrack(label, camera, entry_zone, exit_zone, float(times[0]), float(times[-1]), tuple(observations))

    def _walk(self, index: int, start: float, distractor: bool) -> Tuple[List[_RawTrack], List[Tuple[int, int, LinkLaw]]]:
        spec = self.spec
        rng = make_rng(spec.seed, "identity", index)
        label = f"p{index:05d}"
        canonical = np.abs(rng.standard_normal(spec.dimension))
        canonical /= np.linalg.norm(canonical)

        camera = spec.cameras[int(rng.integers(len(spec.cameras)))]
        entry_zone = self._entry_zone(camera, rng)
        t = float(start)
        tracks: List[_RawTrack] = []
        traversals: List[Tuple[int, int, LinkLaw]] = []
        lo, hi = spec.dwell_range
        while True:
            exit_zone = self._choose_exit(camera, entry_zone, distractor, rng)
            dwell = float(rng.uniform(lo, hi))
            tracks.append(self._track(label, camera.camera, entry_zone, exit_zone, t, dwell, canonical, rng))
            if distractor or len(traversals) >= spec.max_hops:
                break
            link = self._choose_link(camera.camera, exit_zone, rng)
            if link is None:
                break
            dt = sample_transit(link, rng, spec.allow_negative_transit)
            t_next = tracks[-1].t_out + dt
            if t_next < 0.0 or t_next >= spec.duration:
                break
            traversals.append((len(tracks) - 1, len(tracks), link))
            camera = self._layouts[link.dest_camera]
            entry_zone = link.dest_zone
            t = t_next
        return tracks, traversals

    def run(self) -> Tuple[List[PersonTrack], GroundTruth]:
        spec = self.spec
        arrivals = self._arrival_times()
        distractors = self._distractors(len(arrivals))
        raw: List[_RawTrack] = []
        hops = []
        for index, start in enumerate(arrivals):
            tracks, traversals = self._walk(index, float(start), bool(distractors[index]))
            offset = len(raw)
            raw.extend(tracks)
            hops.extend((offset + a, offset + b, link) for a, b, link in traversals)

        order = sorted(range(len(raw)), key=lambda i: (raw[i].t_in, raw[i].camera, raw[i].label))
        seq_of = {raw_index: seq for seq, raw_index in enumerate(order)}
        stream = [
            PersonTrack(camera=raw[i].camera, observations=raw[i].observations, seq=seq_of[i], label=raw[i].label)
            for i in order
        ]
        correspondences = sorted(
            (
                GtCorrespondence(
                    exit_track=stream[seq_of[a]].ref,
                    entry_track=stream[seq_of[b]].ref,
                    label=raw[a].label,
                    source=link.source,
                    dest=link.dest,
                )
                for a, b, link in hops
            ),
            key=lambda c: (c.exit_track.seq, c.entry_track.seq),
        )
        gt = GroundTruth(
            correspondences=tuple(correspondences),
            links=tuple(GtLink(link.source, link.dest, link.mu, link.sigma) for link in spec.gt_links),
            zones=scenario_zones(spec),
        )
        logger.info(
            f"Сценарий сгенерирован: {len(arrivals)} людей ({int(distractors.sum())} без переходов), "
            f"{len(stream)} треков, {len(correspondences)} истинных пар"
        )
        return stream, gt


def simulate(spec: ScenarioSpec) -> Tuple[List[PersonTrack], GroundTruth]:
    """
    Генерирует поток треков и разметку для сценария.

    Args:
        spec: Сценарий

    Returns:
        Tuple[List[PersonTrack], GroundTruth]: Треки, упорядоченные по времени входа, и разметка

    Raises:
        ScenarioException: Если генерация невозможна
    """
    if not spec.cameras:
        raise ScenarioException("Сценарий без камер")
    return ScenarioSimulator(spec).run()


def split_stream(
    stream: Sequence[PersonTrack], gt: Optional[GroundTruth], t_split: float
) -> Tuple[List[PersonTrack], Optional[GroundTruth], List[PersonTrack], Optional[GroundTruth]]:
    """
    Делит поток по времени входа на обучающую и тестовую части.

    Каждая часть перенумеровывается с нуля (как при чтении из файла);
    истинные пары, пересекающие границу, отбрасываются.
    """
    ordered = sorted(stream, key=lambda track: track.seq)
    train = [track for track in ordered if track.entry_time < t_split]
    test = [track for track in ordered if track.entry_time >= t_split]

    def renumber(part: List[PersonTrack]) -> Tuple[List[PersonTrack], Dict[int, TrackRef]]:
        tracks = [replace(track, seq=seq) for seq, track in enumerate(part)]
        return tracks, {old.seq: new.ref for old, new in zip(part, tracks)}

    train, train_refs = renumber(train)
    test, test_refs = renumber(test)
    if gt is None:
        return train, None, test, None

    def part(refs: Dict[int, TrackRef]) -> GroundTruth:
        return GroundTruth(
            correspondences=tuple(
                replace(c, exit_track=refs[c.exit_track.seq], entry_track=refs[c.entry_track.seq])
                for c in gt.correspondences
                if c.exit_track.seq in refs and c.entry_track.seq in refs
            ),
            links=gt.links,
            zones=gt.zones,
        )

    return train, part(train_refs), test, part(test_refs)
