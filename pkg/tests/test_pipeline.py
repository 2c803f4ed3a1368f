"""Integration tests for training, checkpoints, imputation and the essentiality study."""

import numpy as np
import pandas as pd
import pytest
from scipy import stats

from datasets import generate_dataset, normalize_set
from models.config import DataConfig, GeneratorConfig, TrainConfig
from models.domain import SplitName
from networks import Adam, CycleBundle, DiscriminatorNet, GeneratorNet, Module, mcc_loss, run_cycles
from pipeline import (
    EssentialityStage,
    GradCheckStage,
    ImputationStage,
    RunOrchestrator,
    TrainerStage,
    essentiality_study,
    fit,
    load_checkpoint,
    resolve_checkpoint,
    save_checkpoint,
    train_step,
)
from pipeline.checkpoint import LOG_FILE, CheckpointMeta
from pipeline.essentiality import ORIGINAL_ROW
from pipeline.imputation import evaluate_imputation, impute_records, resolve_targets
from pipeline.trainer import (
    batch_tensors,
    discriminator_update,
    draw_target,
    generator_update,
    prepare_split,
)
from quickstart import tiny_configs
from tensor import Tensor
from utils.exceptions import ConfigError, DataError
from utils.report_generator import LOG_COLUMNS


def _networks(cfg):
    return GeneratorNet(cfg.generator, seed=cfg.seed), DiscriminatorNet(cfg.discriminator, seed=cfg.seed + 1)


class _LinearImputer(Module):
    """Imputes domain t as sum_k weight[t, k] * x_k over the supplied sources."""

    def __init__(self, n_domains):
        super().__init__()
        self.weight = self.add_parameter("weight", np.zeros((n_domains, n_domains)))

    def impute(self, sources, target):
        out = None
        for k in sorted(sources):
            term = self.weight[target, k] * sources[k]
            out = term if out is None else out + term
        return out


def _linear_cycle_loss(model, reals, target):
    sources = {k: x for k, x in reals.items() if k != target}
    fake = model.impute(sources, target)
    recons = {}
    for k in sources:
        inputs = {j: x for j, x in sources.items() if j != k}
        inputs[target] = fake
        recons[k] = model.impute(inputs, k)
    bundle = CycleBundle(target=target, n_domains=len(reals), fake=fake, reconstructions=recons, originals=reals)
    return mcc_loss(bundle)


@pytest.fixture
def checkpoint_dir(train_config, phantom_dataset, tmp_path):
    """An untrained checkpoint, enough for the evaluation stages."""
    generator, discriminator = _networks(train_config)
    meta = CheckpointMeta(step=0, domains=list(phantom_dataset.domains))
    return save_checkpoint(tmp_path / "ckpt", generator, discriminator, train_config, meta)


class TestTrainStep:
    """Test one alternating update."""

    def test_report_is_finite(self, train_config, phantom_dataset, rng):
        generator, discriminator = _networks(train_config)
        batch = prepare_split(phantom_dataset, SplitName.TRAIN)[:1]
        report = train_step(generator, discriminator, batch, rng, train_config)
        assert 0 <= report.target_domain < 4
        assert all(np.isfinite(value) for value in report.terms().values())

    def test_updates_both_networks(self, train_config, phantom_dataset, rng):
        generator, discriminator = _networks(train_config)
        g_before, d_before = generator.state_dict(), discriminator.state_dict()
        train_step(generator, discriminator, prepare_split(phantom_dataset, SplitName.TRAIN)[:1], rng, train_config)
        assert any(not np.array_equal(v, generator.state_dict()[k]) for k, v in g_before.items())
        assert any(not np.array_equal(v, discriminator.state_dict()[k]) for k, v in d_before.items())

    def test_empty_batch(self, train_config, rng):
        generator, discriminator = _networks(train_config)
        with pytest.raises(DataError):
            train_step(generator, discriminator, [], rng, train_config)

    def test_target_draw_is_uniform(self):
        """Test the step's target domain passes a chi-square test for uniformity."""
        rng = np.random.default_rng(0)
        counts = np.bincount([draw_target(rng, 4) for _ in range(10_000)], minlength=4)
        assert counts.sum() == 10_000
        assert stats.chisquare(counts).pvalue > 1e-3

    def test_updates_are_isolated(self, train_config, phantom_dataset, rng):
        """Test the discriminator update leaves the generator untouched and vice versa."""
        generator, discriminator = _networks(train_config)
        opt_g = Adam.for_generator(generator, train_config.optimizer)
        opt_d = Adam.for_discriminator(discriminator, train_config.optimizer)
        reals = batch_tensors(prepare_split(phantom_dataset, SplitName.TRAIN)[:1], 4)
        bundle = run_cycles(generator, reals, target=1)

        g_before, d_before = generator.state_dict(), discriminator.state_dict()
        discriminator_update(discriminator, opt_d, reals[1], bundle, rng)
        assert all(np.array_equal(v, generator.state_dict()[k]) for k, v in g_before.items())
        d_after = discriminator.state_dict()
        assert any(not np.array_equal(v, d_after[k]) for k, v in d_before.items())

        generator_update(discriminator, opt_g, bundle, rng, train_config.weights)
        assert all(np.array_equal(v, discriminator.state_dict()[k]) for k, v in d_after.items())
        assert any(not np.array_equal(v, generator.state_dict()[k]) for k, v in g_before.items())


class TestCycleObjectiveDescent:
    """Test Adam on the cycle-consistency loss of a linear imputer."""

    def test_loss_decreases_every_step(self):
        """Test identical domains: every step lowers the loss from the all-zero start."""
        image = Tensor(np.random.default_rng(0).uniform(0.1, 1.0, size=(2, 1, 8, 8)))
        reals = {k: image for k in range(4)}
        model = _LinearImputer(4)
        optimizer = Adam(model, lr=1e-3)
        losses = []
        for _ in range(10):
            optimizer.zero_grad()
            loss = _linear_cycle_loss(model, reals, target=0)
            loss.backward()
            optimizer.step()
            losses.append(loss.item())
        assert losses[0] == pytest.approx(3 * float(np.mean(image.data)), rel=1e-12)
        assert all(later < earlier for earlier, later in zip(losses, losses[1:]))


class TestFit:
    """Test the training loop, checkpoints and resume."""

    def test_writes_run_directory(self, train_config, phantom_dataset, tmp_path):
        """Test the log has one row per step and both checkpoints exist."""
        generator, discriminator = _networks(train_config)
        result = fit(generator, discriminator, phantom_dataset, train_config, run_dir=tmp_path)
        frame = pd.read_csv(tmp_path / LOG_FILE)
        assert list(frame["step"]) == [0, 1, 2, 3]
        assert set(LOG_COLUMNS) <= set(frame.columns)
        assert (tmp_path / "checkpoints" / "last" / "generator.cgs").exists()
        assert result.best_step in (2, 4)
        assert set(result.initial_val_nmse) == set(phantom_dataset.domains)
        assert set(result.final_val_nmse) == set(phantom_dataset.domains)

    def test_validation_records_ssim(self, train_config, phantom_dataset, tmp_path):
        """Test validation steps log an SSIM per domain next to the NMSE."""
        generator, discriminator = _networks(train_config)
        result = fit(generator, discriminator, phantom_dataset, train_config, run_dir=tmp_path)
        assert set(result.history[-1].val_ssim) == set(phantom_dataset.domains)
        columns = [f"val_ssim_{domain}" for domain in phantom_dataset.domains]
        validated = pd.read_csv(tmp_path / LOG_FILE)[columns].dropna()
        assert len(validated) == 2
        assert ((validated >= -1.0) & (validated <= 1.0)).all().all()

    def test_deterministic(self, train_config, phantom_dataset):
        """Test two runs with the same seed give identical weights."""
        a, b = _networks(train_config), _networks(train_config)
        fit(*a, phantom_dataset, train_config)
        fit(*b, phantom_dataset, train_config)
        for name, value in a[0].state_dict().items():
            assert np.array_equal(value, b[0].state_dict()[name]), name

    def test_resume_matches_uninterrupted_run(self, train_config, phantom_dataset, tmp_path):
        """Test stopping at step 2 and resuming to 4 reproduces the 4-step run exactly."""
        straight = _networks(train_config)
        fit(*straight, phantom_dataset, train_config, run_dir=tmp_path / "straight")

        first_half = train_config.model_copy(update={"steps": 2})
        fit(*_networks(first_half), phantom_dataset, first_half, run_dir=tmp_path / "half")
        resumed = _networks(train_config)
        fit(*resumed, phantom_dataset, train_config, run_dir=tmp_path / "resumed",
            resume_from=tmp_path / "half" / "checkpoints" / "last")

        straight_log = (tmp_path / "straight" / LOG_FILE).read_text()
        assert (tmp_path / "resumed" / LOG_FILE).read_text() == straight_log
        for net_a, net_b in zip(straight, resumed):
            for name, value in net_a.state_dict().items():
                assert np.array_equal(value, net_b.state_dict()[name]), name

    def test_domain_count_mismatch(self, train_config):
        three = generate_dataset(3, 1, 32, 32, 0, domains=["T1", "T2", "T1Gd"])
        with pytest.raises(ConfigError):
            fit(*_networks(train_config), three, train_config)

    def test_trainer_stage(self, train_config, phantom_dataset, tmp_path):
        result = TrainerStage().process({"dataset": phantom_dataset, "config": train_config, "out": tmp_path})
        assert result["status"] == "success"
        assert resolve_checkpoint(tmp_path) == resolve_checkpoint(result["checkpoint"])


class TestCheckpoint:
    """Test checkpoint directories."""

    def test_round_trip(self, checkpoint_dir, train_config):
        state = load_checkpoint(checkpoint_dir)
        assert state["config"] == train_config
        assert state["optimizer_states"] is None
        original, _ = _networks(train_config)
        for name, value in original.state_dict().items():
            assert np.array_equal(value, state["generator"].state_dict()[name])

    def test_missing_checkpoint(self, tmp_path):
        with pytest.raises(DataError):
            load_checkpoint(tmp_path)

    def test_resume_without_optimizer_state(self, checkpoint_dir, train_config, phantom_dataset):
        with pytest.raises(DataError):
            fit(*_networks(train_config), phantom_dataset, train_config, resume_from=checkpoint_dir)


class TestImputation:
    """Test held-out imputation and its report."""

    def test_impute_records_shape(self, generator_config, phantom_dataset):
        records = prepare_split(phantom_dataset, SplitName.TEST)
        out = impute_records(GeneratorNet(generator_config), records, 1)
        assert out.shape == (len(records), 32, 32)

    def test_resolve_targets(self):
        assert resolve_targets("all", ["A", "B", "C"]) == [0, 1, 2]
        assert resolve_targets("B", ["A", "B", "C"]) == [1]
        with pytest.raises(ConfigError):
            resolve_targets("D", ["A", "B", "C"])

    def test_baselines_and_tag(self, generator_config, phantom_dataset):
        records = prepare_split(phantom_dataset, SplitName.TEST)
        evaluation = evaluate_imputation(
            GeneratorNet(generator_config), records, phantom_dataset.domains, [3],
            baseline_records=prepare_split(phantom_dataset, SplitName.TRAIN),
            untrained=GeneratorNet(generator_config, seed=9),
        )
        report = evaluation["report"]
        assert report.experiment_tag == "T1Gd_Colla"
        assert len(report.records) == len(records)
        aggregate = report.aggregates[0]
        assert aggregate.baseline_mean_image_nmse > 0
        assert aggregate.baseline_untrained_nmse > 0

    def test_stage_writes_every_domain(self, generator_config, phantom_dataset, tmp_path):
        result = ImputationStage().process({
            "generator": GeneratorNet(generator_config), "dataset": phantom_dataset, "out": tmp_path,
        })
        assert result["status"] == "success"
        frame = pd.read_csv(tmp_path / "imputation_metrics.csv")
        assert sorted(frame["target_domain"].unique()) == sorted(phantom_dataset.domains)
        assert (tmp_path / "imputation_report.pdf").exists()
        assert (tmp_path / "imputation_table.txt").exists()
        assert len(list((tmp_path / "images").glob("*.pgm"))) == 4 * len(phantom_dataset.split(SplitName.TEST))

    def test_stage_unknown_target(self, generator_config, phantom_dataset, tmp_path):
        """Test an unknown domain name becomes an error record with the config exit code."""
        result = ImputationStage().process({
            "generator": GeneratorNet(generator_config), "dataset": phantom_dataset,
            "out": tmp_path, "target_domain": "PD",
        })
        assert result["status"] == "error"
        assert result["exit_code"] == 2


class TestEssentiality:
    """Test the leave-one-out substitution study."""

    def test_rows(self, generator_config, phantom_dataset):
        """Test one Original row plus one row per domain, with perfect Original enhancing Dice."""
        records = prepare_split(phantom_dataset, SplitName.TEST)
        table = essentiality_study(GeneratorNet(generator_config), records)
        labels = [row.label for row in table.rows]
        assert labels == [ORIGINAL_ROW, "T1_Colla", "T2_Colla", "T2F_Colla", "T1Gd_Colla"]
        assert table.rows[0].enhancing_dice_mean == 1.0

    def test_unread_domains_do_not_matter(self, generator_config, phantom_dataset):
        """Test substituting a domain the segmenter never reads leaves the scores unchanged."""
        table = essentiality_study(GeneratorNet(generator_config), prepare_split(phantom_dataset, SplitName.TEST))
        original = table.rows[0]
        for row in table.rows[1:3]:
            assert row.enhancing_dice_mean == original.enhancing_dice_mean
            assert row.whole_dice_mean == original.whole_dice_mean

    def test_repeatable(self, generator_config, phantom_dataset):
        records = prepare_split(phantom_dataset, SplitName.TEST)
        net = GeneratorNet(generator_config, seed=2)
        assert essentiality_study(net, records).rows == essentiality_study(net, records).rows

    def test_no_records(self, generator_config):
        with pytest.raises(DataError):
            essentiality_study(GeneratorNet(generator_config), [])

    def test_generator_domain_mismatch(self, phantom_dataset):
        records = [normalize_set(r) for r in phantom_dataset.split(SplitName.TEST)]
        with pytest.raises(ConfigError):
            essentiality_study(GeneratorNet(GeneratorConfig(n_domains=3, base_channels=2, levels=2)), records)

    def test_stage_writes_table(self, checkpoint_dir, phantom_dataset, tmp_path):
        state = load_checkpoint(checkpoint_dir)
        result = EssentialityStage().process({
            "generator": state["generator"], "dataset": phantom_dataset, "out": tmp_path,
        })
        assert result["status"] == "success"
        assert len(pd.read_csv(tmp_path / "essentiality.csv")) == 5
        assert (tmp_path / "essentiality_report.pdf").exists()


class TestGradCheckStage:
    """Test the self-verification stage."""

    def test_passes(self):
        result = GradCheckStage().process({"seeds": 1, "names": ["sigmoid", "ssim"]})
        assert result["status"] == "success"
        assert [r.name for r in result["results"]] == ["sigmoid", "ssim"]

    def test_composites_get_wider_tolerance(self):
        result = GradCheckStage().process({"seeds": 1, "tolerance": 1e-5, "names": ["ssim"]})
        assert result["results"][0].tolerance == pytest.approx(1e-4)

    def test_dropout_and_network_passes(self):
        """Test dropout and both network forward passes are checked like any other case."""
        names = ["dropout", "generator", "discriminator"]
        result = GradCheckStage().process({"seeds": 2, "names": names})
        assert result["status"] == "success"
        assert [r.name for r in result["results"]] == names
        assert result["results"][1].tolerance == pytest.approx(1e-4)

    def test_unknown_case(self):
        result = GradCheckStage().process({"names": ["softmax"]})
        assert result["exit_code"] == 2


@pytest.mark.slow
class TestOrchestrator:
    """Test the whole workflow on a tiny dataset."""

    def test_workflow_completes(self, tmp_path):
        data_cfg, train_cfg = tiny_configs(steps=4)
        results = RunOrchestrator().process({"data_config": data_cfg, "train_config": train_cfg, "out": tmp_path})
        assert results["status"] == "completed"
        for name in ("data/manifest.txt", "run/training_log.csv", "impute/imputation_summary.csv",
                     "essentiality/essentiality.csv"):
            assert (tmp_path / name).exists(), name
        assert set(results["stage_timings"]) == {"TrainerStage", "ImputationStage", "EssentialityStage"}

    def test_domain_mismatch_fails_cleanly(self, tmp_path):
        _, train_cfg = tiny_configs(steps=1)
        data_cfg = DataConfig(n_subjects=3, slices_per_subject=1, height=32, width=32, domains=["T1", "T2", "T1Gd"])
        results = RunOrchestrator().process({"data_config": data_cfg, "train_config": train_cfg, "out": tmp_path})
        assert results["status"] == "failed"
        assert results["exit_code"] == 2
        assert set(results["stage_timings"]) == {"TrainerStage"}


@pytest.mark.slow
class TestReferenceRun:
    """Train the default configuration once; check the baselines and the planted T1Gd control."""

    REDUNDANT = ("T1", "T2", "T2F")

    @pytest.fixture(scope="class")
    def trained(self):
        data_cfg, train_cfg = DataConfig(), TrainConfig()
        dataset = generate_dataset(
            data_cfg.n_subjects, data_cfg.slices_per_subject, data_cfg.height, data_cfg.width,
            data_cfg.seed, data_cfg.domains,
        )
        generator, discriminator = _networks(train_cfg)
        fit(generator, discriminator, dataset, train_cfg)
        return dataset, generator, train_cfg

    def test_beats_both_baselines(self, trained):
        """Test NMSE is at least 5x below the untrained network and below the mean image."""
        dataset, generator, cfg = trained
        domains = list(dataset.domains)
        report = evaluate_imputation(
            generator, prepare_split(dataset, SplitName.TEST), domains,
            [domains.index(d) for d in self.REDUNDANT],
            baseline_records=prepare_split(dataset, SplitName.TRAIN),
            untrained=GeneratorNet(cfg.generator, seed=cfg.seed),
        )["report"]
        for domain in self.REDUNDANT:
            aggregate = report.aggregate_for(domain)
            assert aggregate.nmse_mean * 5 <= aggregate.baseline_untrained_nmse, domain
            assert aggregate.nmse_mean < aggregate.baseline_mean_image_nmse, domain

    def test_planted_control(self, trained):
        """Test substituting T1Gd drops enhancing Dice while the redundant domains barely move it."""
        dataset, generator, _ = trained
        table = essentiality_study(generator, prepare_split(dataset, SplitName.TEST))
        original = table.row(ORIGINAL_ROW).enhancing_dice_mean
        assert original - table.row("T1Gd_Colla").enhancing_dice_mean > 0.15
        for domain in self.REDUNDANT:
            assert abs(table.row(f"{domain}_Colla").enhancing_dice_mean - original) < 0.05, domain
        for domain in ("T1", "T2"):
            assert abs(table.row(f"{domain}_Colla").whole_dice_mean - table.row(ORIGINAL_ROW).whole_dice_mean) < 0.05
