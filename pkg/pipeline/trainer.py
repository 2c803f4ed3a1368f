"""Alternating discriminator/generator optimization with multiple cycle consistency."""

import time
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field

from datasets import augment, normalize_set
from models.config import LossWeights, TrainConfig
from models.domain import DomainSet, PhantomDataset, SplitName
from models.records import StepReport
from networks import (
    Adam,
    CycleBundle,
    DiscriminatorNet,
    GeneratorNet,
    frozen,
    parameter_norms,
    run_cycles,
    total_discriminator_loss,
    total_generator_loss,
)
from tensor import Tensor
from utils.exceptions import ConfigError, DataError, NumericError
from utils.logger import get_logger
from utils.report_generator import LOG_COLUMNS, write_training_log
from .base_stage import BaseStage
from .checkpoint import (
    LOG_FILE,
    CheckpointMeta,
    load_checkpoint,
    rng_from_state,
    save_checkpoint,
)
from .imputation import validation_scores

PathLike = Union[str, Path]

logger = get_logger("trainer")


def batch_tensors(batch: Sequence[DomainSet], n_domains: int) -> Dict[int, Tensor]:
    """Stack one domain set batch into per-domain tensors (B, 1, H, W)."""
    if not batch:
        raise DataError("train_step: empty batch")
    if batch[0].n_domains != n_domains:
        raise ConfigError(f"batch has {batch[0].n_domains} domains, networks expect {n_domains}")
    stacked = np.stack([record.images for record in batch])
    return {k: Tensor(stacked[:, k:k + 1]) for k in range(n_domains)}


def _write_nan_dump(
    dump_dir: Optional[Path],
    step: int,
    target: int,
    terms: Dict[str, float],
    generator: GeneratorNet,
    discriminator: DiscriminatorNet,
    error: Exception,
) -> Optional[Path]:
    if dump_dir is None:
        return None
    dump_dir.mkdir(parents=True, exist_ok=True)
    path = dump_dir / f"nan_dump_step{step}.txt"
    lines = [f"step={step}", f"target_domain={target}", f"error={error}"]
    lines += [f"{name}={value!r}" for name, value in terms.items()]
    for prefix, net in (("generator", generator), ("discriminator", discriminator)):
        lines += [f"norm.{prefix}.{name}={value!r}" for name, value in parameter_norms(net).items()]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def _finite(name: str, value: Tensor) -> float:
    scalar = value.item()
    if not np.isfinite(scalar):
        raise NumericError(f"{name} is not finite ({scalar})")
    return scalar


def draw_target(rng: np.random.Generator, n_domains: int) -> int:
    """Target domain of one step, uniform over the N domains."""
    return int(rng.integers(n_domains))


def discriminator_update(
    discriminator: DiscriminatorNet,
    optimizer: Adam,
    real_target: Tensor,
    bundle: CycleBundle,
    rng: np.random.Generator,
) -> Dict[str, float]:
    """
    One discriminator step: LSGAN on the real target image against the detached
    self-reconstruction, classifier trained on the real image only.
    """
    optimizer.zero_grad()
    patch_real, logits_real = discriminator(real_target, training=True, rng=rng)
    patch_fake, _ = discriminator(bundle.self_reconstruction.detach(), training=True, rng=rng)
    total, parts = total_discriminator_loss(patch_real, patch_fake, logits_real, bundle.target)
    terms = {name: value.item() for name, value in parts.items()}
    terms["total_discriminator"] = _finite("total_discriminator", total)
    total.backward()
    optimizer.step()
    optimizer.zero_grad()
    return terms


def generator_update(
    discriminator: DiscriminatorNet,
    optimizer: Adam,
    bundle: CycleBundle,
    rng: np.random.Generator,
    weights: LossWeights,
) -> Dict[str, float]:
    """One generator step on the weighted objective with the discriminator frozen."""
    optimizer.zero_grad()
    with frozen(discriminator):
        patch_self, _ = discriminator(bundle.self_reconstruction, training=True, rng=rng)
        _, logits_fake = discriminator(bundle.fake, training=True, rng=rng)
        total, parts = total_generator_loss(bundle, patch_self, logits_fake, weights)
        terms = {name: value.item() for name, value in parts.items()}
        terms["total_generator"] = _finite("total_generator", total)
        # backward inside the block: frozen flags are read during the traversal
        total.backward()
    optimizer.step()
    optimizer.zero_grad()
    return terms


def train_step(
    generator: GeneratorNet,
    discriminator: DiscriminatorNet,
    batch: Sequence[DomainSet],
    rng: np.random.Generator,
    cfg: TrainConfig,
    optimizers: Optional[Tuple[Adam, Adam]] = None,
    step: int = 0,
    dump_dir: Optional[Path] = None,
) -> StepReport:
    """
    One alternating update.

    1. draw the target domain uniformly
    2. forward imputation, N - 1 backward cycles and the self-reconstruction
    3. discriminator update on the real target image against the detached
       self-reconstruction, classifier trained on the real image only
    4. generator update on the weighted objective with the discriminator frozen

    Args:
        generator: Generator (updated in place)
        discriminator: Discriminator (updated in place)
        batch: Preprocessed domain sets
        rng: Source of every random draw of the step
        cfg: Training configuration
        optimizers: (generator, discriminator) optimizers; fresh ones when None
        step: Step index recorded in the report
        dump_dir: Where a NaN diagnostic dump is written

    Returns:
        StepReport with every loss term
    """
    n = cfg.n_domains
    if optimizers is None:
        optimizers = (Adam.for_generator(generator, cfg.optimizer), Adam.for_discriminator(discriminator, cfg.optimizer))
    opt_g, opt_d = optimizers
    reals = batch_tensors(batch, n)
    target = draw_target(rng, n)
    terms: Dict[str, float] = {}

    generator.train()
    discriminator.train()
    try:
        bundle = run_cycles(generator, reals, target)
        terms.update(discriminator_update(discriminator, opt_d, reals[target], bundle, rng))
        terms.update(generator_update(discriminator, opt_g, bundle, rng, cfg.weights))
    except NumericError as exc:
        path = _write_nan_dump(dump_dir, step, target, terms, generator, discriminator, exc)
        logger.error(f"Non-finite loss at step {step} (target {target}); dump: {path}")
        raise

    return StepReport(step=step, target_domain=target, **terms)


class FitResult(BaseModel):
    """Outcome of a training run."""
    history: List[StepReport] = Field(default_factory=list)
    initial_val_nmse: Dict[str, float] = Field(default_factory=dict)
    best_step: Optional[int] = None
    best_val_nmse: Optional[float] = None
    run_dir: Optional[str] = None
    log_path: Optional[str] = None

    @property
    def final_val_nmse(self) -> Dict[str, float]:
        for report in reversed(self.history):
            if report.val_nmse:
                return report.val_nmse
        return {}


def _history_from_log(path: Path, domains: Sequence[str]) -> List[StepReport]:
    if not path.exists():
        return []
    frame = pd.read_csv(path)
    history = []
    for row in frame.to_dict(orient="records"):
        val_nmse, val_ssim = (
            {d: float(row[f"{prefix}_{d}"]) for d in domains if pd.notna(row.get(f"{prefix}_{d}"))}
            for prefix in ("val_nmse", "val_ssim")
        )
        fields = {column: row[column] for column in LOG_COLUMNS}
        fields["step"], fields["target_domain"] = int(fields["step"]), int(fields["target_domain"])
        history.append(StepReport(**fields, val_nmse=val_nmse, val_ssim=val_ssim))
    return history


def prepare_split(dataset: PhantomDataset, split: SplitName, limit: Optional[int] = None) -> List[DomainSet]:
    """Normalized records of one split, optionally capped."""
    records = dataset.split(split)
    if limit is not None:
        records = records[:limit]
    return [normalize_set(record) for record in records]


def fit(
    generator: GeneratorNet,
    discriminator: DiscriminatorNet,
    dataset: PhantomDataset,
    cfg: TrainConfig,
    run_dir: Optional[PathLike] = None,
    resume_from: Optional[PathLike] = None,
) -> FitResult:
    """
    Run ``cfg.steps`` training steps with periodic validation and checkpoints.

    ``run_dir`` receives ``training_log.csv`` and ``checkpoints/{best,last}``.
    When ``resume_from`` is given, networks, optimizers, RNG state, step
    counter and log are restored from that checkpoint and training continues
    up to ``cfg.steps``.
    """
    domains = list(dataset.domains)
    if len(domains) != cfg.n_domains:
        raise ConfigError(f"dataset has {len(domains)} domains, config expects {cfg.n_domains}")
    train_sets = prepare_split(dataset, SplitName.TRAIN)
    val_sets = prepare_split(dataset, SplitName.VAL, cfg.val_max_images)
    if not train_sets:
        raise DataError("training split is empty")

    run_path = Path(run_dir) if run_dir is not None else None
    opt_g = Adam.for_generator(generator, cfg.optimizer)
    opt_d = Adam.for_discriminator(discriminator, cfg.optimizer)
    rng = np.random.default_rng(cfg.seed)
    result = FitResult(run_dir=str(run_path) if run_path else None)
    start = 0

    if resume_from is not None:
        state = load_checkpoint(resume_from)
        generator.load_state_dict(state["generator"].state_dict())
        discriminator.load_state_dict(state["discriminator"].state_dict())
        if state["optimizer_states"] is None:
            raise DataError(f"{state['path']}: checkpoint has no optimizer state, cannot resume")
        opt_g.load_state_dict(state["optimizer_states"][0])
        opt_d.load_state_dict(state["optimizer_states"][1])
        meta: CheckpointMeta = state["meta"]
        rng = rng_from_state(meta.rng_state)
        start = meta.step
        result.history = _history_from_log(state["path"] / LOG_FILE, domains)[:start]
        result.best_step, result.best_val_nmse = meta.best_step, meta.best_val_nmse
        result.initial_val_nmse = dict(meta.initial_val_nmse)
        logger.info(f"Resuming from {state['path']} at step {start}")
    elif val_sets:
        result.initial_val_nmse, initial_ssim = validation_scores(generator, val_sets, domains)
        logger.info(
            f"Step 0 validation NMSE: {_format_scores(result.initial_val_nmse)}; "
            f"SSIM: {_format_scores(initial_ssim)}"
        )

    def checkpoint(name: str, completed: int) -> None:
        if run_path is None:
            return
        meta = CheckpointMeta(
            step=completed,
            domains=domains,
            best_step=result.best_step,
            best_val_nmse=result.best_val_nmse,
            initial_val_nmse=result.initial_val_nmse,
            rng_state=rng.bit_generator.state,
        )
        target = save_checkpoint(run_path / "checkpoints" / name, generator, discriminator, cfg, meta, (opt_g, opt_d))
        write_training_log(result.history, domains, target / LOG_FILE)

    started = time.time()
    for step in range(start, cfg.steps):
        indices = rng.integers(0, len(train_sets), size=cfg.batch_size)
        batch = [train_sets[i] for i in indices]
        if cfg.augment:
            batch = [augment(record, rng) for record in batch]
        report = train_step(generator, discriminator, batch, rng, cfg, (opt_g, opt_d), step, run_path)

        completed = step + 1
        result.history.append(report)
        if val_sets and (completed % cfg.val_every == 0 or completed == cfg.steps):
            report.val_nmse, report.val_ssim = validation_scores(generator, val_sets, domains)
            score = float(np.mean(list(report.val_nmse.values())))
            if result.best_val_nmse is None or score < result.best_val_nmse:
                result.best_step, result.best_val_nmse = completed, score
                checkpoint("best", completed)

        if completed % cfg.log_every == 0 or completed == cfg.steps:
            logger.info(
                f"step {completed}/{cfg.steps} target={domains[report.target_domain]} "
                f"G={report.total_generator:.4f} D={report.total_discriminator:.4f} "
                f"mcc={report.l_mcc:.4f} ssim={report.l_mcc_ssim:.4f}"
                + (f" val_nmse: {_format_scores(report.val_nmse)}" if report.val_nmse else "")
                + (f" val_ssim: {_format_scores(report.val_ssim)}" if report.val_ssim else "")
            )
        if completed % cfg.checkpoint_every == 0 or completed == cfg.steps:
            checkpoint("last", completed)

    if run_path is not None:
        result.log_path = str(write_training_log(result.history, domains, run_path / LOG_FILE))
    logger.info(f"Training finished: {cfg.steps - start} steps in {time.time() - started:.1f}s, best step {result.best_step}")
    return result


def _format_scores(values: Dict[str, float]) -> str:
    return ", ".join(f"{domain}={value:.4f}" for domain, value in values.items())


class TrainerStage(BaseStage):
    """Stage wrapper around ``fit``: builds the networks and writes the run directory."""

    def __init__(self, **kwargs):
        super().__init__(stage_name="TrainerStage", **kwargs)

    def process(self, input_data: Dict[str, Any]) -> Dict[str, Any]:
        """
        Train on a dataset.

        Args:
            input_data: Dictionary containing:
                - dataset: PhantomDataset
                - config: TrainConfig
                - out: Run directory
                - resume: Optional checkpoint directory

        Returns:
            Dictionary with the fit result and checkpoint paths
        """
        start_time = time.time()
        self.logger.info("Starting training...")

        try:
            dataset: PhantomDataset = input_data["dataset"]
            cfg: TrainConfig = input_data["config"]
            out = Path(input_data["out"])
            generator = GeneratorNet(cfg.generator, seed=cfg.seed)
            discriminator = DiscriminatorNet(cfg.discriminator, seed=cfg.seed + 1)
            self.logger.info(
                f"Generator: {generator.parameter_count()} parameters, "
                f"discriminator: {discriminator.parameter_count()} parameters"
            )
            result = fit(generator, discriminator, dataset, cfg, run_dir=out, resume_from=input_data.get("resume"))
            output_data = {
                "status": "success",
                "stage": self.stage_name,
                "fit": result,
                "generator": generator,
                "discriminator": discriminator,
                "checkpoint": str(out / "checkpoints" / ("best" if result.best_step else "last")),
                "log_path": result.log_path,
            }
        except Exception as e:
            output_data = self.error_output(e)

        duration = time.time() - start_time
        self.log_execution(input_data, output_data, duration)

        return output_data
