"""Orchestration: configuration, checkpoints, fairness report, streaming and CLI."""
from .checkpoint import load_checkpoint, save_checkpoint
from .config import PipelineConfig, load_config
from .fairness import FairnessReport, evaluate_fairness

__all__ = ["FairnessReport", "PipelineConfig", "evaluate_fairness", "load_checkpoint", "load_config",
           "save_checkpoint"]
