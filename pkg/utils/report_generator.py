"""Report generation utilities: CSV logs, text tables, PDF summaries and PGM dumps."""

from datetime import datetime
from pathlib import Path
from typing import List, Sequence, Union

import numpy as np
import pandas as pd
from reportlab.lib import colors
from reportlab.lib.enums import TA_CENTER
from reportlab.lib.pagesizes import letter
from reportlab.lib.styles import ParagraphStyle, getSampleStyleSheet
from reportlab.lib.units import inch
from reportlab.platypus import Paragraph, SimpleDocTemplate, Spacer, Table, TableStyle

from models.records import EssentialityTable, MetricsReport, StepReport

PathLike = Union[str, Path]

LOG_COLUMNS = [
    "step", "target_domain", "l_mcc", "l_mcc_ssim", "l_gan_gen", "l_gan_dsc",
    "l_clsf_real", "l_clsf_fake", "total_generator", "total_discriminator",
]


# *** tabular outputs ***

def training_log_frame(reports: Sequence[StepReport], domains: Sequence[str]) -> pd.DataFrame:
    """One row per step; validation NMSE/SSIM columns are empty on steps without validation."""
    rows = []
    for report in reports:
        row = {column: getattr(report, column) for column in LOG_COLUMNS}
        for domain in domains:
            row[f"val_nmse_{domain}"] = report.val_nmse.get(domain, np.nan)
            row[f"val_ssim_{domain}"] = report.val_ssim.get(domain, np.nan)
        rows.append(row)
    columns = LOG_COLUMNS + [f"val_nmse_{d}" for d in domains] + [f"val_ssim_{d}" for d in domains]
    return pd.DataFrame(rows, columns=columns)


def write_training_log(reports: Sequence[StepReport], domains: Sequence[str], path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    training_log_frame(reports, domains).to_csv(path, index=False, float_format="%.10g")
    return path


def metrics_frame(report: MetricsReport) -> pd.DataFrame:
    return pd.DataFrame([record.model_dump() for record in report.records])


def aggregates_frame(report: MetricsReport) -> pd.DataFrame:
    return pd.DataFrame([aggregate.model_dump() for aggregate in report.aggregates])


def essentiality_frame(table: EssentialityTable) -> pd.DataFrame:
    return pd.DataFrame([row.model_dump() for row in table.rows])


def write_csv(frame: pd.DataFrame, path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format="%.10g")
    return path


def format_metrics_table(report: MetricsReport) -> str:
    """Human-readable per-domain NMSE/SSIM summary with baselines."""
    lines = [f"Imputation report: {report.experiment_tag} ({report.split} split)"]
    header = f"{'domain':<8}{'n':>5}{'NMSE':>18}{'SSIM':>18}{'mean-img NMSE':>15}{'untrained NMSE':>16}"
    lines += [header, "-" * len(header)]
    for a in report.aggregates:
        mean_image = f"{a.baseline_mean_image_nmse:.4f}" if a.baseline_mean_image_nmse is not None else "-"
        untrained = f"{a.baseline_untrained_nmse:.4f}" if a.baseline_untrained_nmse is not None else "-"
        lines.append(
            f"{a.target_domain:<8}{a.n_images:>5}"
            f"{f'{a.nmse_mean:.4f} ± {a.nmse_std:.4f}':>18}"
            f"{f'{a.ssim_mean:.4f} ± {a.ssim_std:.4f}':>18}"
            f"{mean_image:>15}{untrained:>16}"
        )
    return "\n".join(lines)


def format_essentiality_table(table: EssentialityTable) -> str:
    """Dice per substitution row, in the Original / <domain>_Colla layout."""
    header = f"{'row':<12}{'n':>5}{'enhancing Dice':>20}{'whole Dice':>20}"
    lines = ["Essentiality study (toy segmentation Dice)", header, "-" * len(header)]
    for row in table.rows:
        lines.append(
            f"{row.label:<12}{row.n_images:>5}"
            f"{f'{row.enhancing_dice_mean:.4f} ± {row.enhancing_dice_std:.4f}':>20}"
            f"{f'{row.whole_dice_mean:.4f} ± {row.whole_dice_std:.4f}':>20}"
        )
    return "\n".join(lines)


# *** image dumps ***

def write_pgm(image: np.ndarray, path: PathLike) -> Path:
    """8-bit binary portable graymap, min-max windowed to [0, 255]."""
    image = np.asarray(image, dtype=np.float64).reshape(np.asarray(image).shape[-2:])
    low, high = float(image.min()), float(image.max())
    scaled = np.zeros(image.shape) if high == low else (image - low) / (high - low)
    pixels = np.clip(np.round(scaled * 255.0), 0, 255).astype(np.uint8)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    height, width = pixels.shape
    with open(path, "wb") as f:
        f.write(f"P5\n{width} {height}\n255\n".encode("ascii"))
        f.write(pixels.tobytes())
    return path


# *** PDF ***

class ReportGenerator:
    """Generate PDF summaries of imputation and essentiality runs."""

    def __init__(self):
        self.styles = getSampleStyleSheet()
        self._setup_custom_styles()

    def _setup_custom_styles(self):
        """Setup custom paragraph styles."""
        self.styles.add(ParagraphStyle(
            name='CustomTitle',
            parent=self.styles['Heading1'],
            fontSize=20,
            textColor=colors.HexColor('#1a1a1a'),
            spaceAfter=24,
            alignment=TA_CENTER
        ))
        self.styles.add(ParagraphStyle(
            name='SectionHeader',
            parent=self.styles['Heading2'],
            fontSize=14,
            textColor=colors.HexColor('#2c3e50'),
            spaceAfter=10,
            spaceBefore=10
        ))

    def generate_imputation_report(self, report: MetricsReport, output_path: PathLike) -> Path:
        """
        Per-domain NMSE/SSIM table with the mean-image and untrained baselines.

        Args:
            report: Imputation metrics
            output_path: Path to save PDF

        Returns:
            Path to generated PDF
        """
        story = [
            Paragraph(f"Imputation Report: {report.experiment_tag}", self.styles['CustomTitle']),
            Paragraph("Run Information", self.styles['SectionHeader']),
            self._create_table([
                ['Checkpoint:', report.checkpoint or '-'],
                ['Split:', report.split],
                ['Images:', str(len(report.records))],
            ]),
            Spacer(1, 0.2 * inch),
            Paragraph("Per-Domain Results", self.styles['SectionHeader']),
        ]
        rows = [['Domain', 'n', 'NMSE', 'SSIM', 'Mean-image NMSE', 'Untrained NMSE']]
        for a in report.aggregates:
            rows.append([
                a.target_domain,
                str(a.n_images),
                f"{a.nmse_mean:.4f} ± {a.nmse_std:.4f}",
                f"{a.ssim_mean:.4f} ± {a.ssim_std:.4f}",
                f"{a.baseline_mean_image_nmse:.4f}" if a.baseline_mean_image_nmse is not None else '-',
                f"{a.baseline_untrained_nmse:.4f}" if a.baseline_untrained_nmse is not None else '-',
            ])
        story.append(self._create_table(rows, header=True))
        return self._build(story, output_path)

    def generate_essentiality_report(self, table: EssentialityTable, output_path: PathLike) -> Path:
        """Dice table of the leave-one-out substitution study."""
        story = [
            Paragraph("Domain Essentiality Study", self.styles['CustomTitle']),
            Paragraph(
                "Each row replaces one domain of the test split by its imputation and "
                "re-runs the threshold segmenter against the ground-truth lesion masks.",
                self.styles['Normal'],
            ),
            Spacer(1, 0.2 * inch),
        ]
        rows = [['Row', 'n', 'Enhancing Dice', 'Whole Dice', 'Enhancing drop']]
        original = table.row("Original").enhancing_dice_mean if table.rows else 0.0
        for row in table.rows:
            rows.append([
                row.label,
                str(row.n_images),
                f"{row.enhancing_dice_mean:.4f} ± {row.enhancing_dice_std:.4f}",
                f"{row.whole_dice_mean:.4f} ± {row.whole_dice_std:.4f}",
                f"{original - row.enhancing_dice_mean:+.4f}",
            ])
        story.append(self._create_table(rows, header=True))
        return self._build(story, output_path)

    def _build(self, story: List, output_path: PathLike) -> Path:
        output_path = Path(output_path)
        output_path.parent.mkdir(parents=True, exist_ok=True)
        story.append(Spacer(1, 0.4 * inch))
        story.append(Paragraph(
            f"Report Generated: {datetime.now().strftime('%Y-%m-%d %H:%M:%S')}",
            self.styles['Normal']
        ))
        SimpleDocTemplate(str(output_path), pagesize=letter).build(story)
        return output_path

    def _create_table(self, data: list, header: bool = False) -> Table:
        """Create a formatted table."""
        table = Table(data)

        style = [
            ('ALIGN', (0, 0), (-1, -1), 'LEFT'),
            ('FONTNAME', (0, 0), (0, -1), 'Helvetica-Bold'),
            ('FONTSIZE', (0, 0), (-1, -1), 9),
            ('BOTTOMPADDING', (0, 0), (-1, -1), 5),
            ('TOPPADDING', (0, 0), (-1, -1), 5),
            ('GRID', (0, 0), (-1, -1), 0.5, colors.grey),
        ]

        if header:
            style.extend([
                ('BACKGROUND', (0, 0), (-1, 0), colors.grey),
                ('TEXTCOLOR', (0, 0), (-1, 0), colors.whitesmoke),
                ('FONTNAME', (0, 0), (-1, 0), 'Helvetica-Bold'),
            ])

        table.setStyle(TableStyle(style))
        return table
