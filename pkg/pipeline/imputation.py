"""Imputation of held-out domain sets and its NMSE/SSIM evaluation."""

import time
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from datasets import normalize_set
from models.domain import DomainSet, PhantomDataset, SplitName, TargetMask
from models.records import ImageMetrics, MetricsReport
from networks import GeneratorNet, impute
from tensor import Tensor, no_grad
from utils.exceptions import ConfigError
from utils.metrics import mean_image_baseline, nmse, ssim_scalar
from utils.report_generator import (
    ReportGenerator,
    aggregates_frame,
    format_metrics_table,
    metrics_frame,
    write_csv,
    write_pgm,
)
from .base_stage import BaseStage

EVAL_BATCH = 8
ALL_DOMAINS = "all"


def impute_records(generator: GeneratorNet, records: Sequence[DomainSet], target: int) -> np.ndarray:
    """
    Impute domain ``target`` of every record from its other domains (eval mode, no graph).

    Returns:
        (len(records), H, W) imputed images
    """
    generator.eval()
    outputs = []
    with no_grad():
        for start in range(0, len(records), EVAL_BATCH):
            chunk = np.stack([record.images for record in records[start:start + EVAL_BATCH]])
            inputs = {k: Tensor(chunk[:, k:k + 1]) for k in range(chunk.shape[1]) if k != target}
            mask = TargetMask(domain=target, n_domains=chunk.shape[1], batch_size=chunk.shape[0],
                              height=chunk.shape[2], width=chunk.shape[3])
            outputs.append(impute(generator, inputs, mask).data[:, 0])
    generator.train()
    return np.concatenate(outputs) if outputs else np.zeros((0,))


def validation_scores(
    generator: GeneratorNet, records: Sequence[DomainSet], domains: Sequence[str]
) -> Tuple[Dict[str, float], Dict[str, float]]:
    """Mean NMSE and mean SSIM per target domain over preprocessed ``records``."""
    nmse_by_domain, ssim_by_domain = {}, {}
    for k, domain in enumerate(domains):
        imputed = impute_records(generator, records, k)
        nmse_by_domain[domain] = float(np.mean([nmse(r.images[k], x) for r, x in zip(records, imputed)]))
        ssim_by_domain[domain] = float(np.mean([ssim_scalar(r.images[k], x) for r, x in zip(records, imputed)]))
    return nmse_by_domain, ssim_by_domain


def resolve_targets(target_domain: str, domains: Sequence[str]) -> List[int]:
    """Domain indices named by a --target-domain value ('all' or one domain name)."""
    if target_domain == ALL_DOMAINS:
        return list(range(len(domains)))
    if target_domain not in domains:
        raise ConfigError(f"target domain '{target_domain}' is not one of the dataset domains {list(domains)}")
    return [list(domains).index(target_domain)]


def evaluate_imputation(
    generator: GeneratorNet,
    records: Sequence[DomainSet],
    domains: Sequence[str],
    targets: Sequence[int],
    baseline_records: Optional[Sequence[DomainSet]] = None,
    untrained: Optional[GeneratorNet] = None,
    experiment_tag: Optional[str] = None,
    **report_kwargs: Any,
) -> Dict[str, Any]:
    """
    Per-image NMSE/SSIM for each target domain, with optional baselines.

    Args:
        generator: Trained generator
        records: Preprocessed evaluation records
        domains: Domain labels
        targets: Domain indices to impute
        baseline_records: Preprocessed training records for the mean-image baseline
        untrained: Freshly initialized generator for the untrained baseline
        experiment_tag: Report tag; defaults to '<domain>_Colla' or 'all_Colla'

    Returns:
        {"report": MetricsReport, "imputed": {domain index: (n, H, W) array}}
    """
    records_out: List[ImageMetrics] = []
    baselines: Dict[str, Dict[str, float]] = {}
    imputed_by_domain: Dict[int, np.ndarray] = {}
    for k in targets:
        domain = domains[k]
        imputed = impute_records(generator, records, k)
        imputed_by_domain[k] = imputed
        for record, image in zip(records, imputed):
            records_out.append(ImageMetrics(
                subject_id=record.subject_id,
                slice_id=record.slice_id,
                target_domain=domain,
                nmse=nmse(record.images[k], image),
                ssim=float(np.clip(ssim_scalar(record.images[k], image), -1.0, 1.0)),
            ))
        extra: Dict[str, float] = {}
        if baseline_records:
            mean_image = mean_image_baseline(baseline_records, k)
            extra["mean_image"] = float(np.mean([nmse(r.images[k], mean_image) for r in records]))
        if untrained is not None:
            raw = impute_records(untrained, records, k)
            extra["untrained"] = float(np.mean([nmse(r.images[k], x) for r, x in zip(records, raw)]))
        baselines[domain] = extra

    tag = experiment_tag or (f"{domains[targets[0]]}_Colla" if len(targets) == 1 else "all_Colla")
    report = MetricsReport.from_records(tag, records_out, baselines, **report_kwargs)
    return {"report": report, "imputed": imputed_by_domain}


class ImputationStage(BaseStage):
    """Impute held-out domains, score them and write the report files."""

    def __init__(self, **kwargs):
        super().__init__(stage_name="ImputationStage", **kwargs)

    def process(self, input_data: Dict[str, Any]) -> Dict[str, Any]:
        """
        Impute one or all domains of a split.

        Args:
            input_data: Dictionary containing:
                - generator: Trained GeneratorNet
                - dataset: PhantomDataset
                - target_domain: Domain name or 'all'
                - out: Output directory
                - split: Split name (default test)
                - checkpoint: Checkpoint path recorded in the report
                - untrained: Optional untrained GeneratorNet for the baseline
                - dump_images: Write PGM files of every imputation (default True)

        Returns:
            Dictionary with the MetricsReport and written paths
        """
        start_time = time.time()
        self.logger.info("Starting imputation...")

        try:
            generator: GeneratorNet = input_data["generator"]
            dataset: PhantomDataset = input_data["dataset"]
            out = Path(input_data["out"])
            split = SplitName(input_data.get("split", SplitName.TEST))
            domains = list(dataset.domains)
            if len(domains) != generator.n_domains:
                raise ConfigError(f"dataset has {len(domains)} domains, generator has {generator.n_domains}")
            targets = resolve_targets(input_data.get("target_domain", ALL_DOMAINS), domains)

            records = [normalize_set(r) for r in dataset.split(split)]
            if not records:
                raise ConfigError(f"split '{split.value}' is empty")
            baseline_records = [normalize_set(r) for r in dataset.split(SplitName.TRAIN)]
            evaluation = evaluate_imputation(
                generator, records, domains, targets,
                baseline_records=baseline_records,
                untrained=input_data.get("untrained"),
                checkpoint=input_data.get("checkpoint"),
                split=split.value,
            )
            report: MetricsReport = evaluation["report"]

            written = [
                write_csv(metrics_frame(report), out / "imputation_metrics.csv"),
                write_csv(aggregates_frame(report), out / "imputation_summary.csv"),
            ]
            table = format_metrics_table(report)
            (out / "imputation_table.txt").write_text(table + "\n", encoding="utf-8")
            written.append(out / "imputation_table.txt")
            written.append(ReportGenerator().generate_imputation_report(report, out / "imputation_report.pdf"))
            if input_data.get("dump_images", True):
                for k, images in evaluation["imputed"].items():
                    for record, image in zip(records, images):
                        name = f"{record.subject_id}_s{record.slice_id:02d}_{domains[k]}.pgm"
                        written.append(write_pgm(image, out / "images" / name))
            for line in table.splitlines():
                self.logger.info(line)

            output_data = {
                "status": "success",
                "stage": self.stage_name,
                "report": report,
                "outputs": [str(p) for p in written],
            }
        except Exception as e:
            output_data = self.error_output(e)

        duration = time.time() - start_time
        self.log_execution(input_data, output_data, duration)

        return output_data
