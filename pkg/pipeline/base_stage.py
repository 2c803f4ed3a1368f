"""Base stage class for all pipeline stages."""

from abc import ABC, abstractmethod
from datetime import datetime
from typing import Any, Dict, Optional
import logging

from utils.exceptions import CollaGANError
from utils.logger import get_logger


class BaseStage(ABC):
    """Abstract base class for all stages."""

    def __init__(self, stage_name: str, logger: Optional[logging.Logger] = None):
        """
        Initialize base stage.

        Args:
            stage_name: Name of the stage
            logger: Logger instance
        """
        self.stage_name = stage_name
        self.logger = logger or get_logger(stage_name)
        self.execution_history = []

    @abstractmethod
    def process(self, input_data: Dict[str, Any]) -> Dict[str, Any]:
        """
        Process input data and return results.

        Args:
            input_data: Input data for processing

        Returns:
            Processing results; ``status`` is "success" or "error"
        """
        pass

    def error_output(self, exc: Exception) -> Dict[str, Any]:
        """Standard failure record; ``error_type`` maps to the CLI exit code."""
        self.logger.error(f"{self.stage_name} failed: {exc}")
        category = exc.category if isinstance(exc, CollaGANError) else "internal"
        return {
            "status": "error",
            "stage": self.stage_name,
            "error": str(exc),
            "error_type": category,
            "exit_code": exc.exit_code if isinstance(exc, CollaGANError) else 1,
        }

    def log_execution(self, input_data: Dict[str, Any], output_data: Dict[str, Any], duration: float):
        """
        Log execution details.

        Args:
            input_data: Input data
            output_data: Output data
            duration: Execution duration in seconds
        """
        execution_record = {
            "timestamp": datetime.now().isoformat(),
            "stage": self.stage_name,
            "duration_seconds": duration,
            "status": output_data.get("status", "unknown")
        }
        self.execution_history.append(execution_record)

        self.logger.info(
            f"{self.stage_name} completed in {duration:.2f}s - Status: {execution_record['status']}"
        )
