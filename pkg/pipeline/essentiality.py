"""Leave-one-out domain substitution scored by downstream segmentation Dice."""

import time
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from datasets import ThresholdSegmenter, normalize_set
from models.domain import DomainSet, PhantomDataset, SplitName
from models.records import EssentialityRow, EssentialityTable
from networks import GeneratorNet
from utils.exceptions import ConfigError, DataError
from utils.metrics import dice
from utils.report_generator import ReportGenerator, essentiality_frame, format_essentiality_table, write_csv
from .base_stage import BaseStage
from .imputation import impute_records

ORIGINAL_ROW = "Original"


def _score_row(
    label: str,
    substituted: Optional[str],
    image_sets: Sequence[np.ndarray],
    records: Sequence[DomainSet],
    segmenter: ThresholdSegmenter,
) -> EssentialityRow:
    enhancing, whole = [], []
    for images, record in zip(image_sets, records):
        masks = segmenter.segment(images, record.domains, record.support)
        enhancing.append(dice(record.enhancing_mask, masks["enhancing"]))
        whole.append(dice(record.whole_mask, masks["whole"]))
    return EssentialityRow(
        label=label,
        substituted_domain=substituted,
        n_images=len(records),
        enhancing_dice_mean=float(np.mean(enhancing)),
        enhancing_dice_std=float(np.std(enhancing)),
        whole_dice_mean=float(np.mean(whole)),
        whole_dice_std=float(np.std(whole)),
    )


def essentiality_study(
    generator: GeneratorNet,
    records: Sequence[DomainSet],
    segmenter: Optional[ThresholdSegmenter] = None,
    checkpoint: Optional[str] = None,
) -> EssentialityTable:
    """
    Replace each domain in turn by its imputation and re-score the segmenter.

    Args:
        generator: Generator to impute with; an untrained one gives the baseline table
        records: Preprocessed evaluation records (normally the test split)
        segmenter: Downstream segmenter; defaults to ``ThresholdSegmenter()``

    Returns:
        Table with an Original row followed by one '<domain>_Colla' row per domain
    """
    if not records:
        raise DataError("essentiality_study: no records")
    segmenter = segmenter or ThresholdSegmenter()
    domains = list(records[0].domains)
    if len(domains) != generator.n_domains:
        raise ConfigError(f"records have {len(domains)} domains, generator has {generator.n_domains}")

    originals = [record.images for record in records]
    rows: List[EssentialityRow] = [_score_row(ORIGINAL_ROW, None, originals, records, segmenter)]
    for k, domain in enumerate(domains):
        imputed = impute_records(generator, records, k)
        substituted = []
        for images, image in zip(originals, imputed):
            swapped = images.copy()
            swapped[k] = image
            substituted.append(swapped)
        rows.append(_score_row(f"{domain}_Colla", domain, substituted, records, segmenter))
    return EssentialityTable(rows=rows, checkpoint=checkpoint)


class EssentialityStage(BaseStage):
    """Run the substitution study on a split and write its table files."""

    def __init__(self, segmenter: Optional[ThresholdSegmenter] = None, **kwargs):
        super().__init__(stage_name="EssentialityStage", **kwargs)
        self.segmenter = segmenter or ThresholdSegmenter()

    def process(self, input_data: Dict[str, Any]) -> Dict[str, Any]:
        """
        Args:
            input_data: Dictionary containing:
                - generator: Trained GeneratorNet
                - dataset: PhantomDataset
                - out: Output directory
                - split: Split name (default test)
                - checkpoint: Checkpoint path recorded in the table

        Returns:
            Dictionary with the EssentialityTable and written paths
        """
        start_time = time.time()
        self.logger.info("Starting essentiality study...")

        try:
            dataset: PhantomDataset = input_data["dataset"]
            out = Path(input_data["out"])
            split = SplitName(input_data.get("split", SplitName.TEST))
            records = [normalize_set(r) for r in dataset.split(split)]
            table = essentiality_study(
                input_data["generator"], records, self.segmenter, checkpoint=input_data.get("checkpoint")
            )

            text = format_essentiality_table(table)
            (out / "essentiality_table.txt").parent.mkdir(parents=True, exist_ok=True)
            (out / "essentiality_table.txt").write_text(text + "\n", encoding="utf-8")
            written = [
                write_csv(essentiality_frame(table), out / "essentiality.csv"),
                out / "essentiality_table.txt",
                ReportGenerator().generate_essentiality_report(table, out / "essentiality_report.pdf"),
            ]
            for line in text.splitlines():
                self.logger.info(line)

            output_data = {
                "status": "success",
                "stage": self.stage_name,
                "table": table,
                "outputs": [str(p) for p in written],
            }
        except Exception as e:
            output_data = self.error_output(e)

        duration = time.time() - start_time
        self.log_execution(input_data, output_data, duration)

        return output_data
