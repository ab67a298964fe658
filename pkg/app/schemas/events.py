"""
Схемы строк файла потока событий (JSONL): один трек на строку
"""
from typing import List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, model_validator

from app.models.observation import FeatureVector, Observation, PersonTrack


class ObservationRecord(BaseModel):
    model_config = ConfigDict(extra="forbid")

    time: float = Field(ge=0.0)
    position: Tuple[float, float]
    feature: List[float] = Field(min_length=1)


class TrackRecord(BaseModel):
    """
    Трек в формате файла событий.

    Поля entry_*/exit_* избыточны и обязаны совпадать с первым
    и последним наблюдением.
    """
    model_config = ConfigDict(extra="forbid")

    camera: str
    label: Optional[str] = None
    entry_time: float
    exit_time: float
    entry_point: Tuple[float, float]
    exit_point: Tuple[float, float]
    observations: List[ObservationRecord] = Field(min_length=1)

    @model_validator(mode="after")
    def check_consistency(self) -> "TrackRecord":
        times = [obs.time for obs in self.observations]
        if any(not b > a for a, b in zip(times, times[1:])):
            raise ValueError("observations are not sorted by time")
        first, last = self.observations[0], self.observations[-1]
        if self.entry_time != first.time or self.exit_time != last.time:
            raise ValueError("entry_time/exit_time do not match the observations")
        if tuple(self.entry_point) != tuple(first.position) or tuple(self.exit_point) != tuple(last.position):
            raise ValueError("entry_point/exit_point do not match the observations")
        return self

    @classmethod
    def from_track(cls, track: PersonTrack) -> "TrackRecord":
        return cls(
            camera=track.camera,
            label=track.label,
            entry_time=track.entry_time,
            exit_time=track.exit_time,
            entry_point=track.entry_point,
            exit_point=track.exit_point,
            observations=[
                ObservationRecord(time=obs.time, position=obs.position, feature=obs.feature.to_list())
                for obs in track.observations
            ],
        )

    def to_track(self, seq: int) -> PersonTrack:
        return PersonTrack(
            camera=self.camera,
            observations=tuple(
                Observation(
                    camera=self.camera,
                    time=obs.time,
                    position=obs.position,
                    feature=FeatureVector(obs.feature),
                )
                for obs in self.observations
            ),
            seq=seq,
            label=self.label,
        )
