"""Orchestrator that chains dataset generation, training, imputation and the essentiality study."""

import time
from datetime import datetime
from pathlib import Path
from typing import Any, Dict

from datasets import SyntheticPhantomGenerator, save_dataset
from models.config import DataConfig, TrainConfig
from networks import GeneratorNet
from .base_stage import BaseStage
from .essentiality import EssentialityStage
from .imputation import ALL_DOMAINS, ImputationStage
from .trainer import TrainerStage


class StageFailed(Exception):
    """A sub-stage returned an error record."""

    def __init__(self, result: Dict[str, Any]):
        self.result = result
        super().__init__(f"{result.get('stage')} failed: {result.get('error')}")


class RunOrchestrator(BaseStage):
    """Main orchestrator that runs the full imputation workflow in one output directory."""

    def __init__(self, **kwargs):
        super().__init__(stage_name="RunOrchestrator", **kwargs)

        self.trainer = TrainerStage()
        self.imputation = ImputationStage()
        self.essentiality = EssentialityStage()

        self.logger.info("RunOrchestrator initialized with all stages")

    def _check(self, result: Dict[str, Any]) -> Dict[str, Any]:
        if result.get("status") != "success":
            raise StageFailed(result)
        return result

    def stage_timings(self) -> Dict[str, float]:
        """Duration of the latest run of each sub-stage, from its execution history."""
        return {
            stage.stage_name: stage.execution_history[-1]["duration_seconds"]
            for stage in (self.trainer, self.imputation, self.essentiality)
            if stage.execution_history
        }

    def process(self, input_data: Dict[str, Any]) -> Dict[str, Any]:
        """
        Run gen-data, train, impute and eval-essentiality.

        Args:
            input_data: Dictionary containing:
                - data_config: DataConfig
                - train_config: TrainConfig (n_domains must match the data domains)
                - out: Output directory; receives data/, run/, impute/ and essentiality/
                - target_domain: Domain name or 'all' (default)

        Returns:
            Workflow record with every stage result
        """
        start_time = time.time()
        self.logger.info("=" * 80)
        self.logger.info("Starting imputation workflow...")
        self.logger.info("=" * 80)

        workflow_results = {
            "workflow_id": f"WF-{datetime.now().strftime('%Y%m%d%H%M%S')}",
            "start_time": datetime.now().isoformat(),
            "status": "processing",
        }

        try:
            data_cfg: DataConfig = input_data["data_config"]
            train_cfg: TrainConfig = input_data["train_config"]
            out = Path(input_data["out"])

            self.logger.info("[STEP 1/4] Generating phantom dataset...")
            dataset = SyntheticPhantomGenerator(data_cfg).generate()
            data_dir = save_dataset(dataset, out / "data")
            workflow_results["data"] = {"status": "success", "path": str(data_dir)}
            self.logger.info(f"✓ Dataset written to {data_dir}")

            self.logger.info("[STEP 2/4] Training...")
            train_result = self._check(self.trainer.process({
                "dataset": dataset,
                "config": train_cfg,
                "out": out / "run",
            }))
            workflow_results["train"] = train_result
            fit = train_result["fit"]
            self.logger.info(f"✓ Training completed - best step {fit.best_step}, best val NMSE {fit.best_val_nmse}")

            generator = train_result["generator"]
            self.logger.info("[STEP 3/4] Imputing test split...")
            impute_result = self._check(self.imputation.process({
                "generator": generator,
                "dataset": dataset,
                "target_domain": input_data.get("target_domain", ALL_DOMAINS),
                "out": out / "impute",
                "checkpoint": train_result["checkpoint"],
                "untrained": GeneratorNet(train_cfg.generator, seed=train_cfg.seed),
            }))
            workflow_results["impute"] = impute_result
            self.logger.info("✓ Imputation completed")

            self.logger.info("[STEP 4/4] Running essentiality study...")
            study_result = self._check(self.essentiality.process({
                "generator": generator,
                "dataset": dataset,
                "out": out / "essentiality",
                "checkpoint": train_result["checkpoint"],
            }))
            workflow_results["essentiality"] = study_result
            self.logger.info("✓ Essentiality study completed")

            workflow_results["status"] = "completed"
            workflow_results["end_time"] = datetime.now().isoformat()
            workflow_results["total_processing_time"] = time.time() - start_time
            self.logger.info("=" * 80)
            self.logger.info(f"Workflow completed successfully in {workflow_results['total_processing_time']:.2f}s")
            self.logger.info("=" * 80)

        except StageFailed as e:
            self.logger.error(f"❌ Workflow failed: {e}")
            workflow_results.update(
                status="failed",
                error=str(e),
                error_type=e.result.get("error_type"),
                exit_code=e.result.get("exit_code", 1),
            )
        except Exception as e:
            failure = self.error_output(e)
            workflow_results.update(
                status="failed", error=failure["error"], error_type=failure["error_type"], exit_code=failure["exit_code"]
            )

        workflow_results["stage_timings"] = self.stage_timings()
        workflow_results.setdefault("end_time", datetime.now().isoformat())
        workflow_results.setdefault("total_processing_time", time.time() - start_time)
        duration = time.time() - start_time
        self.log_execution(input_data, workflow_results, duration)

        return workflow_results
