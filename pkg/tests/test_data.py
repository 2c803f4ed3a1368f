"""Unit tests for phantom generation, storage, transforms and the segmenter."""

import numpy as np
import pytest

from datasets import (
    CONTRASTS,
    SyntheticPhantomGenerator,
    ThresholdSegmenter,
    augment,
    generate_dataset,
    load_dataset,
    normalize,
    normalize_set,
    read_manifest,
    render_slice,
    save_dataset,
    slice_layers,
    split_counts,
)
from models.config import DataConfig
from models.domain import SplitName
from utils.exceptions import ConfigError, DataError
from utils.metrics import dice


class TestPhantomGenerator:
    """Test scene rendering and the subject split."""

    def test_deterministic(self, phantom_dataset):
        """Test the same arguments give bitwise-identical images."""
        again = generate_dataset(n_subjects=3, slices_per_subject=2, height=32, width=32, seed=0)
        for a, b in zip(phantom_dataset.sets, again.sets):
            assert np.array_equal(a.images, b.images)
        assert phantom_dataset.splits == again.splits

    def test_seed_changes_data(self, phantom_dataset):
        """Test another seed gives other anatomy."""
        other = generate_dataset(n_subjects=3, slices_per_subject=2, height=32, width=32, seed=1)
        assert not np.array_equal(phantom_dataset.sets[0].images, other.sets[0].images)

    @pytest.mark.parametrize("subjects,expected", [(3, (1, 1, 1)), (10, (8, 1, 1)), (20, (16, 2, 2))])
    def test_split_counts(self, subjects, expected):
        """Test the 8:1:1 split with at least one held-out subject each."""
        counts = split_counts(subjects)
        assert (counts["train"], counts["val"], counts["test"]) == expected

    def test_too_few_subjects(self):
        """Test fewer than three subjects cannot be split."""
        with pytest.raises(ConfigError):
            split_counts(2)

    def test_splits_are_subject_disjoint(self, phantom_dataset):
        """Test no subject appears in two splits."""
        seen = [set(phantom_dataset.subjects(name)) for name in SplitName]
        assert sum(len(s) for s in seen) == 3
        assert not (seen[0] & seen[1] or seen[0] & seen[2] or seen[1] & seen[2])

    def test_background_is_zero(self, phantom_dataset):
        """Test every domain is exactly zero outside the support."""
        for record in phantom_dataset.sets:
            assert np.all(record.images[:, ~record.support] == 0.0)
            assert np.all(record.images[:, record.support] > 0.0)

    def test_subject_ids(self, phantom_dataset):
        """Test subjects are numbered S000, S001, ..."""
        assert phantom_dataset.subjects() == ["S000", "S001", "S002"]

    def test_enhancing_only_visible_in_t1gd(self):
        """Test removing the enhancing cores changes T1Gd and nothing else."""
        generator = SyntheticPhantomGenerator(DataConfig(n_subjects=3, height=64, width=64, seed=0))
        scene = generator.generate_scene(0)
        z = scene.lesions[1].zc
        with_cores = slice_layers(scene, z, 64, 64)
        without = slice_layers(scene, z, 64, 64, include_enhancing=False)
        assert with_cores.enhancing.any()
        domains = list(CONTRASTS)
        a, b = render_slice(with_cores, domains), render_slice(without, domains)
        for k, domain in enumerate(domains):
            if domain == "T1Gd":
                assert not np.array_equal(a[k], b[k])
            else:
                assert np.array_equal(a[k], b[k])

    def test_enhancing_inside_edema(self, phantom_dataset):
        """Test the exclusive lesion is always inside the whole lesion."""
        for record in phantom_dataset.sets:
            assert not np.any(record.enhancing_mask & ~record.whole_mask)

    def test_unknown_domain(self):
        """Test unsupported contrasts are rejected."""
        with pytest.raises(ConfigError):
            generate_dataset(3, 1, 32, 32, 0, domains=["T1", "PD"])


class TestStorage:
    """Test the dataset directory format."""

    def test_round_trip(self, phantom_dataset, dataset_dir):
        """Test a saved dataset loads back identically."""
        loaded = load_dataset(dataset_dir)
        assert loaded.domains == phantom_dataset.domains
        assert loaded.splits == phantom_dataset.splits
        for a, b in zip(phantom_dataset.sets, loaded.sets):
            assert (a.subject_id, a.slice_id) == (b.subject_id, b.slice_id)
            assert np.array_equal(a.images, b.images)
            assert np.array_equal(a.whole_mask, b.whole_mask)

    def test_manifest_header(self, dataset_dir):
        """Test the manifest records seed, size and domains."""
        manifest = read_manifest(dataset_dir)
        assert manifest["seed"] == 0
        assert (manifest["height"], manifest["width"]) == (32, 32)
        assert manifest["domains"] == ["T1", "T2", "T2F", "T1Gd"]
        assert len(manifest["subjects"]) == 3

    def test_missing_directory(self, tmp_path):
        """Test a missing manifest is a data error."""
        with pytest.raises(DataError):
            load_dataset(tmp_path / "nowhere")

    def test_unsupported_version(self, phantom_dataset, tmp_path):
        """Test a manifest from a newer format version is rejected."""
        root = save_dataset(phantom_dataset, tmp_path / "data")
        manifest = root / "manifest.txt"
        manifest.write_text(manifest.read_text().replace("version=1", "version=2"))
        with pytest.raises(DataError):
            load_dataset(root)

    def test_missing_subject_file(self, phantom_dataset, tmp_path):
        """Test a deleted subject snapshot is a data error."""
        root = save_dataset(phantom_dataset, tmp_path / "data")
        (root / "S001.cgs").unlink()
        with pytest.raises(DataError):
            load_dataset(root)


class TestTransforms:
    """Test normalization and augmentation."""

    def test_normalize_unit_std(self, phantom_dataset):
        """Test nonzero pixels end with unit standard deviation and zeros stay zero."""
        image = phantom_dataset.sets[0].images[1]
        out = normalize(image)
        assert out[image != 0].std() == pytest.approx(1.0)
        assert np.all(out[image == 0] == 0.0)

    def test_normalize_idempotent(self, phantom_dataset):
        """Test normalizing a normalized image changes nothing, bitwise."""
        for record in phantom_dataset.sets:
            for image in record.images:
                once = normalize(image)
                assert np.array_equal(normalize(once), once)

    def test_normalize_all_zero(self):
        """Test an empty image has no scale."""
        with pytest.raises(DataError):
            normalize(np.zeros((4, 4)))

    def test_normalize_constant(self):
        """Test constant nonzero pixels have no scale either."""
        with pytest.raises(DataError):
            normalize(np.full((4, 4), 2.0))

    def test_identity_augmentation(self, phantom_dataset, rng):
        """Test scale 1 without flip leaves the record unchanged."""
        record = phantom_dataset.sets[0]
        out = augment(record, rng, scale=1.0, flip=False)
        assert np.allclose(out.images, record.images)
        assert np.array_equal(out.support, record.support)

    def test_flip_reverses_width(self, phantom_dataset, rng):
        """Test a forced flip mirrors every domain and mask."""
        record = phantom_dataset.sets[0]
        out = augment(record, rng, scale=1.0, flip=True)
        assert np.allclose(out.images, record.images[:, :, ::-1])
        assert np.array_equal(out.whole_mask, record.whole_mask[:, ::-1])

    def test_augmentation_keeps_alignment(self, phantom_dataset, rng):
        """Test a random draw keeps the background zero in every domain."""
        out = augment(phantom_dataset.sets[1], rng)
        assert np.all(out.images[:, ~out.support] == 0.0)

    def test_forced_values_consume_the_same_draws(self, phantom_dataset):
        """Test forcing scale and flip does not shift the random stream."""
        a, b = np.random.default_rng(0), np.random.default_rng(0)
        augment(phantom_dataset.sets[0], a)
        augment(phantom_dataset.sets[0], b, scale=1.0, flip=False)
        assert a.random() == b.random()


class TestSegmenter:
    """Test the threshold segmenter."""

    def test_original_data_segments_perfectly(self, phantom_dataset):
        """Test the exclusive lesion is recovered exactly from real T1Gd."""
        segmenter = ThresholdSegmenter()
        for record in phantom_dataset.sets:
            masks = segmenter.segment(record.images, record.domains, record.support)
            assert dice(record.enhancing_mask, masks["enhancing"]) == 1.0

    def test_invariant_to_normalization(self, phantom_dataset):
        """Test per-image scaling does not change the masks."""
        segmenter = ThresholdSegmenter()
        record = phantom_dataset.sets[0]
        raw = segmenter.segment(record.images, record.domains, record.support)
        scaled = segmenter.segment(normalize_set(record).images, record.domains, record.support)
        for name in raw:
            assert np.array_equal(raw[name], scaled[name])

    def test_reads_only_two_domains(self):
        """Test the segmenter declares the domains it looks at."""
        assert tuple(ThresholdSegmenter().reads()) == ("T1Gd", "T2F")

    def test_missing_domain(self, phantom_dataset):
        """Test a dataset without the needed domain is rejected."""
        record = phantom_dataset.sets[0]
        with pytest.raises(ConfigError):
            ThresholdSegmenter().segment(record.images, ["A", "B", "C", "D"], record.support)
