"""Tests for the synthetic module."""

import numpy as np
import pytest

from cxr_preproc.augment import make_rng
from cxr_preproc.dataset import FINDINGS
from cxr_preproc.dataset import Finding
from cxr_preproc.dataset import load_labels
from cxr_preproc.dataset import prevalence
from cxr_preproc.imaging import load_image
from cxr_preproc.synthetic import Lung
from cxr_preproc.synthetic import SyntheticConfig
from cxr_preproc.synthetic import finding_counts
from cxr_preproc.synthetic import generate_corpus
from cxr_preproc.synthetic import lung_extent
from cxr_preproc.synthetic import render_radiograph


class TestFindingCounts:
    """Test label marginals of the synthetic corpus."""

    def test_reference_prevalences(self):
        """Test counts follow the reference prevalences with mass overridden."""
        counts = finding_counts(SyntheticConfig(n_images=3125, mass_prevalence=0.2))
        assert counts[Finding.CARDIOMEGALY] == 529
        assert counts[Finding.PNEUMOTHORAX] == 11
        assert counts[Finding.MASS] == 625

    def test_small_corpus(self):
        """Test rounding on a desk-scale corpus."""
        counts = finding_counts(SyntheticConfig(n_images=600))
        assert counts[Finding.FOREIGN_OBJECT] == 215
        assert counts[Finding.MASS] == 90
        assert all(0 <= c <= 600 for c in counts.values())


class TestRenderRadiograph:
    """Test single image rendering."""

    @pytest.fixture
    def config(self):
        """Noise-free 64 pixel config without rib stripes."""
        return SyntheticConfig(size=64, noise_sigma=0.0, rib_amplitude=0.0, max_distractors=0)

    def test_unit_range_and_shape(self):
        """Test pixels stay in [0, 1]."""
        cfg = SyntheticConfig(size=48)
        img = render_radiograph(np.ones(len(FINDINGS), dtype=np.uint8), make_rng(0, 1), cfg)
        assert img.pixels.shape == (48, 48)
        assert img.pixels.min() >= 0.0
        assert img.pixels.max() <= 1.0

    def test_deterministic(self, config):
        """Test the same generator state gives the same image."""
        findings = np.zeros(len(FINDINGS), dtype=np.uint8)
        a = render_radiograph(findings, make_rng(5, 1, 0), config)
        b = render_radiograph(findings, make_rng(5, 1, 0), config)
        np.testing.assert_array_equal(a.pixels, b.pixels)

    def test_lungs_are_darker_than_tissue(self, config):
        """Test the lung fields are the dark regions."""
        img = render_radiograph(np.zeros(len(FINDINGS), dtype=np.uint8), make_rng(0, 1), config)
        assert img.pixels[32, 32 - 9] < 0.4
        assert img.pixels[32, 32 + 9] < 0.4
        assert img.pixels[3, 3] > 0.6

    def test_mass_brightens_lungs(self, config):
        """Test a mass adds a bright blob inside the lung fields."""
        findings = np.zeros(len(FINDINGS), dtype=np.uint8)
        clean = render_radiograph(findings, make_rng(0, 1), config)
        findings[FINDINGS.index(Finding.MASS)] = 1
        with_mass = render_radiograph(findings, make_rng(0, 1), config)
        diff = with_mass.pixels - clean.pixels
        assert diff.min() >= 0.0
        assert 0.0 < diff.max() <= 0.35 + 1e-9
        assert np.count_nonzero(diff) == 9

    def test_distractors_stay_outside_lungs(self):
        """Test distractor blobs never touch the lung extent."""
        cfg = SyntheticConfig(size=64, noise_sigma=0.0, rib_amplitude=0.0, max_distractors=3)
        quiet = cfg.model_copy(update={"max_distractors": 0})
        findings = np.zeros(len(FINDINGS), dtype=np.uint8)
        for seed in range(20):
            busy = render_radiograph(findings, make_rng(seed, 1), cfg)
            # Same draws up to the distractor count, so geometry matches.
            plain = render_radiograph(findings, make_rng(seed, 1), quiet)
            changed = np.argwhere(busy.pixels != plain.pixels)
            dark = np.argwhere(plain.pixels < 0.4)
            if changed.size == 0:
                continue
            y0, x0 = dark.min(axis=0)
            y1, x1 = dark.max(axis=0)
            inside = (
                (changed[:, 0] >= y0) & (changed[:, 0] <= y1) & (changed[:, 1] >= x0) & (changed[:, 1] <= x1)
            )
            assert not inside.any()

    def test_lung_extent(self):
        """Test the joint box of two ellipses."""
        lungs = (Lung(20.0, 32.0, 6.0, 12.0), Lung(44.0, 32.0, 6.0, 12.0))
        box = lung_extent(lungs, 64)
        assert (box.x0, box.y0, box.x1, box.y1) == (14, 20, 51, 45)


class TestGenerateCorpus:
    """Test corpus generation on disk."""

    def test_writes_images_and_labels(self, tmp_path):
        """Test one readable image per label row."""
        cfg = SyntheticConfig(n_images=12, size=32, seed=1)
        table = generate_corpus(tmp_path, cfg)
        assert len(table) == 12
        loaded = load_labels(tmp_path / "labels.csv")
        assert loaded.sample_ids == table.sample_ids
        np.testing.assert_array_equal(loaded.labels, table.labels)
        for sid in table.sample_ids:
            img = load_image(tmp_path / "images" / f"{sid}.pgm")
            assert img.pixels.shape == (32, 32)

    def test_mass_prevalence(self, tmp_path):
        """Test the mass override is honoured exactly."""
        table = generate_corpus(tmp_path, SyntheticConfig(n_images=40, size=32, mass_prevalence=0.25))
        assert prevalence(table, Finding.MASS) == pytest.approx(0.25)

    def test_reproducible(self, tmp_path):
        """Test two corpora from one seed are byte-identical."""
        cfg = SyntheticConfig(n_images=5, size=32, seed=7)
        generate_corpus(tmp_path / "a", cfg)
        generate_corpus(tmp_path / "b", cfg)
        for path in sorted((tmp_path / "a" / "images").iterdir()):
            assert path.read_bytes() == (tmp_path / "b" / "images" / path.name).read_bytes()
        assert (tmp_path / "a" / "labels.csv").read_bytes() == (tmp_path / "b" / "labels.csv").read_bytes()
