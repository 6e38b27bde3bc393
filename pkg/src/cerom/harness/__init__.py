"""Experiment orchestration and command line interface."""

from .config import ExperimentConfig
from .experiments import Pipeline, TableReport, build_pipeline, run_ce_table, run_rom_table

__all__ = ["ExperimentConfig", "Pipeline", "TableReport", "build_pipeline", "run_ce_table", "run_rom_table"]
