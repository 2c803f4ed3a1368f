"""Pipeline stages for training, imputation, evaluation and self-verification."""

from .base_stage import BaseStage
from .checkpoint import CheckpointMeta, save_checkpoint, load_checkpoint, resolve_checkpoint
from .imputation import ImputationStage, impute_records, validation_scores, evaluate_imputation, resolve_targets
from .trainer import TrainerStage, FitResult, fit, train_step
from .essentiality import EssentialityStage, essentiality_study
from .gradcheck_stage import GradCheckStage, run_gradcheck
from .orchestrator import RunOrchestrator

__all__ = [
    "BaseStage",
    "CheckpointMeta",
    "save_checkpoint",
    "load_checkpoint",
    "resolve_checkpoint",
    "ImputationStage",
    "impute_records",
    "validation_scores",
    "evaluate_imputation",
    "resolve_targets",
    "TrainerStage",
    "FitResult",
    "fit",
    "train_step",
    "EssentialityStage",
    "essentiality_study",
    "GradCheckStage",
    "run_gradcheck",
    "RunOrchestrator",
]
