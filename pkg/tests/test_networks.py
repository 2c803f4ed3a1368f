"""Unit tests for the generator, discriminator, layers and optimizer."""

import numpy as np
import pytest

from models.config import GeneratorConfig, OptimizerConfig
from models.domain import TargetMask
from networks import (
    Adam,
    CCAMUnit,
    CCNLUnit,
    DiscriminatorNet,
    GeneratorNet,
    Linear,
    discriminate,
    frozen,
    impute,
    patchgan_target,
    run_cycles,
)
from tensor import Tensor, check_gradients, projected
from utils.exceptions import ConfigError, DataError, DimensionError


def _complement(batch, target):
    return {k: v for k, v in batch.items() if k != target}


class TestBlocks:
    """Test the CCNL and CCAM units."""

    def test_ccnl_output_channels(self, rng):
        """Test the unit emits c1 + c3 channels at the input resolution."""
        unit = CCNLUnit(rng, 3, 2, 5)
        out = unit(Tensor(rng.normal(size=(2, 3, 8, 8))))
        assert out.shape == (2, 7, 8, 8)

    def test_ccnl_rejects_wrong_channels(self, rng):
        """Test a channel mismatch raises."""
        with pytest.raises(DimensionError):
            CCNLUnit(rng, 3, 2, 2)(Tensor(rng.normal(size=(1, 4, 8, 8))))

    def test_ccam_attention_range_and_conditioning(self, rng):
        """Test weights lie in (0, 1) and depend on the target domain."""
        unit = CCAMUnit(rng, 6, 4)
        features = Tensor(rng.normal(size=(2, 6, 4, 4)))
        first = unit.attention(features, TargetMask(domain=0, n_domains=4, batch_size=2, height=4, width=4)).data
        other = unit.attention(features, TargetMask(domain=3, n_domains=4, batch_size=2, height=4, width=4)).data
        assert first.shape == (2, 6)
        assert np.all((first > 0) & (first < 1))
        assert not np.allclose(first, other)

    def test_ccam_with_zero_weights_halves_input(self, rng):
        """Test zero MLP weights give sigmoid(0) = 0.5 on every channel."""
        unit = CCAMUnit(rng, 6, 4)
        for param in unit.parameters():
            param.data[...] = 0.0
        features = Tensor(rng.normal(size=(2, 6, 4, 4)))
        out = unit(features, TargetMask(domain=1, n_domains=4, batch_size=2, height=4, width=4))
        np.testing.assert_array_equal(out.data, 0.5 * features.data)

    def test_frozen_blocks_parameter_gradients(self, rng):
        """Test gradients reach the input but not the frozen module."""
        unit = CCNLUnit(rng, 2, 2, 2)
        x = Tensor(rng.normal(size=(1, 2, 4, 4)), requires_grad=True)
        with frozen(unit):
            projected(unit(x)).backward()
        assert x.grad is not None
        assert all(p.grad is None for p in unit.parameters())
        assert all(p.requires_grad for p in unit.parameters())


class TestGenerator:
    """Test the collaborative generator."""

    def test_impute_shape(self, generator_config, domain_batch):
        """Test the output matches one input image."""
        net = GeneratorNet(generator_config, seed=0)
        out = impute(net, _complement(domain_batch, 2), TargetMask.like(2, 4, domain_batch[0]))
        assert out.shape == (2, 1, 32, 32)

    def test_same_seed_same_weights(self, generator_config):
        """Test initialization is deterministic in the seed."""
        a, b = GeneratorNet(generator_config, seed=5), GeneratorNet(generator_config, seed=5)
        for (name, pa), (_, pb) in zip(a.named_parameters(), b.named_parameters()):
            assert np.array_equal(pa.data, pb.data), name

    def test_target_among_inputs_rejected(self, generator_config, domain_batch):
        """Test the target image may not be supplied."""
        net = GeneratorNet(generator_config)
        inputs = _complement(domain_batch, 1)
        inputs[1] = domain_batch[1]
        del inputs[0]
        with pytest.raises(ConfigError):
            impute(net, inputs, TargetMask.like(1, 4, domain_batch[0]))

    def test_missing_source_rejected(self, generator_config, domain_batch):
        """Test all N - 1 sources are required."""
        net = GeneratorNet(generator_config)
        inputs = _complement(domain_batch, 0)
        del inputs[3]
        with pytest.raises(ConfigError):
            impute(net, inputs, TargetMask.like(0, 4, domain_batch[0]))

    def test_indivisible_size_rejected(self, generator_config, rng):
        """Test the spatial size must survive every downsampling."""
        net = GeneratorNet(GeneratorConfig(n_domains=4, base_channels=2, levels=3))
        images = {k: Tensor(rng.uniform(size=(1, 1, 30, 30))) for k in (1, 2, 3)}
        with pytest.raises(DimensionError):
            impute(net, images, TargetMask(domain=0, n_domains=4, height=30, width=30))

    def test_output_depends_on_target(self, generator_config, domain_batch):
        """Test the same sources imputed towards different targets differ."""
        net = GeneratorNet(generator_config, seed=1)
        sources = {k: domain_batch[k] for k in (1, 2)}
        to_zero = impute(net, {**sources, 3: domain_batch[3]}, TargetMask.like(0, 4, domain_batch[0]))
        to_three = impute(net, {**sources, 0: domain_batch[3]}, TargetMask.like(3, 4, domain_batch[0]))
        assert not np.allclose(to_zero.data, to_three.data)

    def test_input_order_does_not_matter(self, generator_config, domain_batch):
        """Test routing by domain index: insertion order and container type leave the output unchanged."""
        net = GeneratorNet(generator_config, seed=2)
        mask = TargetMask.like(0, 4, domain_batch[0])
        ascending = impute(net, {k: domain_batch[k] for k in (1, 2, 3)}, mask).data
        shuffled = impute(net, {k: domain_batch[k] for k in (3, 1, 2)}, mask).data
        pairs = impute(net, [(k, domain_batch[k]) for k in (2, 3, 1)], mask).data
        assert np.array_equal(ascending, shuffled)
        assert np.array_equal(ascending, pairs)

    def test_run_cycles_bundle(self, generator_config, domain_batch):
        """Test one forward fake, N - 1 backward cycles and the self-reconstruction."""
        bundle = run_cycles(GeneratorNet(generator_config), domain_batch, target=2)
        assert bundle.fake.shape == (2, 1, 32, 32)
        assert sorted(bundle.reconstructions) == [0, 1, 3]
        assert bundle.self_reconstruction.shape == (2, 1, 32, 32)

    def test_run_cycles_needs_every_domain(self, generator_config, domain_batch):
        """Test cycles require the complete set."""
        with pytest.raises(ConfigError):
            run_cycles(GeneratorNet(generator_config), _complement(domain_batch, 0), target=1)

    @pytest.mark.slow
    def test_parameter_gradients(self, rng):
        """Test backprop through the whole generator against finite differences."""
        net = GeneratorNet(GeneratorConfig(n_domains=3, base_channels=2, levels=2), seed=0)
        images = {k: Tensor(rng.uniform(0.1, 1.0, size=(1, 1, 8, 8))) for k in (0, 2)}
        mask = TargetMask(domain=1, n_domains=3, height=8, width=8)
        params = dict(net.named_parameters())
        chosen = [params["head.weight"], params["dec_ccam0.fc2.weight"], params["encoder0.ccnl0.conv3.weight"]]
        errors = check_gradients(lambda: projected(impute(net, images, mask)), chosen)
        assert max(errors.values()) < 1e-4


class TestDiscriminator:
    """Test the multi-resolution discriminator."""

    def test_output_shapes(self, discriminator_config, rng):
        """Test the patch map is H/32 and the logits have one entry per domain."""
        net = DiscriminatorNet(discriminator_config)
        patch, logits = discriminate(net, Tensor(rng.normal(size=(2, 1, 64, 64))), training=False)
        assert patch.shape == (2, 1, 2, 2)
        assert logits.shape == (2, 4)

    def test_size_must_divide_by_32(self, discriminator_config, rng):
        """Test an unsupported size raises."""
        with pytest.raises(DimensionError):
            DiscriminatorNet(discriminator_config)(Tensor(rng.normal(size=(1, 1, 48, 48))))

    def test_eval_is_deterministic(self, discriminator_config, rng):
        """Test eval mode ignores dropout."""
        net = DiscriminatorNet(discriminator_config)
        image = Tensor(rng.normal(size=(1, 1, 32, 32)))
        assert np.array_equal(net(image)[0].data, net(image)[0].data)

    def test_fresh_classifier_is_at_chance(self, discriminator_config, rng):
        """Test an untrained classifier hits random labels at about 1/N, within four binomial sigmas."""
        net = DiscriminatorNet(discriminator_config, seed=5)
        n_samples, chunk = 1000, 200
        labels = rng.integers(0, 4, size=n_samples)
        hits = 0
        for start in range(0, n_samples, chunk):
            _, logits = net(Tensor(rng.uniform(size=(chunk, 1, 32, 32))))
            hits += int(np.sum(logits.data.argmax(axis=1) == labels[start:start + chunk]))
        sigma = np.sqrt(0.25 * 0.75 / n_samples)
        assert abs(hits / n_samples - 0.25) < 4 * sigma

    def test_training_needs_rng(self, discriminator_config, rng):
        """Test dropout in training mode requires a generator."""
        with pytest.raises(ConfigError):
            DiscriminatorNet(discriminator_config)(Tensor(rng.normal(size=(1, 1, 32, 32))), training=True)

    def test_patchgan_target(self):
        """Test constant targets and rejection of other values."""
        assert np.all(patchgan_target((2, 1, 2, 2), 1).data == 1.0)
        with pytest.raises(ConfigError):
            patchgan_target((1,), 2)


class TestAdam:
    """Test the adaptive-moment optimizer."""

    def test_first_step_moves_by_lr(self, rng):
        """Test the bias-corrected first step is lr * sign(grad)."""
        unit = Linear(rng, 3, 2)
        before = {n: p.data.copy() for n, p in unit.named_parameters()}
        opt = Adam(unit, lr=1e-3)
        projected(unit(Tensor(rng.normal(size=(4, 3))))).backward()
        grads = {n: p.grad.copy() for n, p in unit.named_parameters()}
        opt.step()
        for name, param in unit.named_parameters():
            expected = before[name] - 1e-3 * np.sign(grads[name])
            assert np.allclose(param.data, expected, atol=1e-8)

    def test_skips_parameters_without_gradient(self, rng):
        """Test untouched parameters stay put."""
        unit = CCNLUnit(rng, 1, 1, 1)
        before = unit.state_dict()
        Adam(unit).step()
        for name, value in unit.state_dict().items():
            assert np.array_equal(value, before[name])

    def test_state_round_trip(self, rng):
        """Test moments and step count survive state_dict/load_state_dict."""
        unit = CCNLUnit(rng, 1, 1, 1)
        opt = Adam.for_generator(unit, OptimizerConfig())
        projected(unit(Tensor(rng.normal(size=(1, 1, 4, 4))))).backward()
        opt.step()
        restored = Adam.for_generator(unit, OptimizerConfig())
        restored.load_state_dict(opt.state_dict())
        assert restored.step_count == 1
        for name in opt.m:
            assert np.array_equal(restored.m[name], opt.m[name])
            assert np.array_equal(restored.v[name], opt.v[name])

    def test_mismatched_state_rejected(self, rng):
        """Test state from another module is rejected."""
        opt = Adam(CCNLUnit(rng, 1, 1, 1))
        with pytest.raises(DataError):
            Adam(CCNLUnit(rng, 2, 1, 1)).load_state_dict(opt.state_dict())


class TestModuleState:
    """Test parameter snapshots of whole networks."""

    def test_load_state_dict_copies_weights(self, generator_config):
        """Test weights transfer between differently seeded networks."""
        a, b = GeneratorNet(generator_config, seed=0), GeneratorNet(generator_config, seed=1)
        b.load_state_dict(a.state_dict())
        for name, value in a.state_dict().items():
            assert np.array_equal(value, b.state_dict()[name])

    def test_load_state_dict_rejects_other_architecture(self, generator_config):
        """Test a checkpoint from a different architecture is a data error."""
        other = GeneratorNet(GeneratorConfig(n_domains=4, base_channels=3, levels=2))
        with pytest.raises(DataError):
            GeneratorNet(generator_config).load_state_dict(other.state_dict())
