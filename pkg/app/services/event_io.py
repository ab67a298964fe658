"""
Чтение и запись потока событий (JSONL) и файла разметки
"""
import json
import logging
import os
from typing import List, Optional, Sequence, Tuple

from pydantic import ValidationError

from app.core.exceptions import ReidTopologyException
from app.models.ground_truth import GroundTruth
from app.models.observation import CoreTypeException, PersonTrack
from app.schemas.events import TrackRecord

logger = logging.getLogger(__name__)


class EventStreamException(ReidTopologyException):
    """Исключение для некорректных файлов потока событий"""
    pass


def ground_truth_path(path: str) -> str:
    """Файл разметки лежит рядом с потоком: events.jsonl -> events.gt.json"""
    stem, _ = os.path.splitext(path)
    return f"{stem}.gt.json"


def export_events(stream: Sequence[PersonTrack], gt: Optional[GroundTruth], path: str) -> str:
    """
    Записывает поток треков в JSONL и разметку в соседний файл.

    Args:
        stream: Треки в порядке потока
        gt: Разметка (None - файл разметки не пишется)
        path: Путь к файлу событий

    Returns:
        str: Путь к записанному файлу событий
    """
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        for track in stream:
            f.write(TrackRecord.from_track(track).model_dump_json())
            f.write("\n")
    if gt is not None:
        with open(ground_truth_path(path), "w", encoding="utf-8") as f:
            json.dump(gt.to_dict(), f, indent=2)
    logger.info(f"Поток событий сохранен: {path} ({len(stream)} треков)")
    return path


def _first_error(error: ValidationError) -> str:
    item = error.errors()[0]
    where = ".".join(str(part) for part in item.get("loc", ()))
    return f"{where}: {item['msg']}" if where else item["msg"]


def import_events(path: str) -> Tuple[List[PersonTrack], Optional[GroundTruth]]:
    """
    Читает поток событий и, если он есть, файл разметки.

    Порядковый номер трека равен номеру его строки (с нуля без учета пустых строк).

    Raises:
        FileNotFoundError: Если файл событий не существует
        EventStreamException: Некорректная строка (в сообщении - номер строки)
    """
    if not os.path.exists(path):
        raise FileNotFoundError(f"Файл событий не найден: {path}")

    stream: List[PersonTrack] = []
    with open(path, "rb") as f:
        for line_no, raw in enumerate(f, start=1):
            try:
                line = raw.decode("utf-8")
            except UnicodeDecodeError as e:
                raise EventStreamException(f"{path}: line {line_no}: некорректная кодировка UTF-8: {e.reason}") from e
            if not line.strip():
                continue
            try:
                record = TrackRecord.model_validate_json(line)
                stream.append(record.to_track(seq=len(stream)))
            except ValidationError as e:
                raise EventStreamException(f"{path}: line {line_no}: {_first_error(e)}") from e
            except CoreTypeException as e:
                raise EventStreamException(f"{path}: line {line_no}: {e}") from e

    gt = None
    gt_path = ground_truth_path(path)
    if os.path.exists(gt_path):
        try:
            with open(gt_path, "r", encoding="utf-8") as f:
                gt = GroundTruth.from_dict(json.load(f))
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
            raise EventStreamException(f"{gt_path}: некорректный файл разметки: {e}") from e
    logger.info(f"Поток событий загружен: {path} ({len(stream)} треков, разметка: {'есть' if gt else 'нет'})")
    return stream, gt
