"""
Общие помощники подкоманд: выходная директория, конфигурация, сборка отчетов
"""
import argparse
import os
from typing import List, Optional

from app.core.config import settings
from app.models.topology import Correspondence
from app.schemas.config import PipelineConfig, load_pipeline_config
from app.schemas.report import CorrespondenceRecord, EdgeReport, PipelineReport, StageReport
from app.services.artifacts import ArtifactStore
from app.services.pipeline import PipelineState

EVENTS_FILE = "events.jsonl"
TEST_EVENTS_FILE = "events_test.jsonl"


def store_for(args: argparse.Namespace) -> ArtifactStore:
    return ArtifactStore(args.out_dir or settings.OUTPUT_DIR)


def input_path(store: ArtifactStore, value: Optional[str], default: str) -> str:
    """Явный путь - относительно рабочей директории, имя по умолчанию - внутри выходной директории"""
    return os.path.abspath(value if value else store.path(default))


def pipeline_config(args: argparse.Namespace) -> PipelineConfig:
    """Конфигурация конвейера; --seed переопределяет зерно из файла"""
    return load_pipeline_config(args.config, seed_override(args))


def seed_override(args: argparse.Namespace) -> Optional[int]:
    """Зерно из --seed; без файла конфигурации - DEFAULT_SEED из настроек"""
    if args.seed is not None:
        return args.seed
    if not args.config or args.config == "default":
        return settings.DEFAULT_SEED
    return None


def build_report(
    stage: str,
    cfg: PipelineConfig,
    correspondences: List[Correspondence],
    comparisons: int,
    state: Optional[PipelineState] = None,
) -> PipelineReport:
    """Отчет этапа без времени выполнения"""
    report = PipelineReport(
        stage=stage,
        seed=cfg.seed,
        comparisons=comparisons,
        correspondences=[CorrespondenceRecord.from_correspondence(c) for c in correspondences],
    )
    if state is not None:
        report.iterations = state.iteration
        report.stages = [StageReport(**vars(record)) for record in state.history]
        report.cam_edges = [EdgeReport.from_edge(edge) for edge in state.cam_topology.edges]
        report.zone_edges = [EdgeReport.from_edge(edge) for edge in state.topology.edges]
    return report


def stem(path: str) -> str:
    return os.path.splitext(os.path.basename(path))[0]
