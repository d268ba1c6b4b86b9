"""Tests for the dataset module."""

import numpy as np
import pytest

from cxr_preproc.dataset import FINDINGS
from cxr_preproc.dataset import INDIANA_POSITIVE_COUNTS
from cxr_preproc.dataset import INDIANA_STUDY_COUNT
from cxr_preproc.dataset import CacheError
from cxr_preproc.dataset import Finding
from cxr_preproc.dataset import LabelFormatError
from cxr_preproc.dataset import LabelTable
from cxr_preproc.dataset import PreprocessConfig
from cxr_preproc.dataset import PreprocessingOps
from cxr_preproc.dataset import SplitError
from cxr_preproc.dataset import SplitPlan
from cxr_preproc.dataset import Variant
from cxr_preproc.dataset import VariantCache
from cxr_preproc.dataset import digest_inputs
from cxr_preproc.dataset import load_labels
from cxr_preproc.dataset import make_splits
from cxr_preproc.dataset import materialize_variant
from cxr_preproc.dataset import materialize_with_status
from cxr_preproc.dataset import prevalence
from cxr_preproc.dataset import prevalence_table
from cxr_preproc.dataset import resolve_image
from cxr_preproc.dataset import synthesize_labels
from cxr_preproc.imaging import Image
from cxr_preproc.imaging import crop
from cxr_preproc.imaging import suppress_bones
from tests.fixtures import INDIANA_LABELS
from tests.fixtures import get_label_csv_text
from tests.fixtures import get_label_table
from tests.fixtures import get_smooth_bump
from tests.fixtures import get_two_field_image

# Prevalences in percent of the reference revision, one decimal.
REFERENCE_PREVALENCE_PCT = {
    Finding.PLEURAL_EFFUSION: 4.7,
    Finding.INFILTRATE: 4.9,
    Finding.CONGESTION: 5.4,
    Finding.ATELECTASIS: 6.8,
    Finding.PNEUMOTHORAX: 0.4,
    Finding.CARDIOMEGALY: 16.9,
    Finding.MASS: 14.3,
    Finding.FOREIGN_OBJECT: 35.9,
}


class TestLoadLabels:
    """Test strict label ingestion."""

    def test_single_row(self, tmp_path):
        """Test a one-row file parses to one binary row."""
        path = tmp_path / "labels.csv"
        path.write_text(get_label_csv_text(["a,0,1,0,0,0,0,0,1"]))
        table = load_labels(path)
        assert table.sample_ids == ("a",)
        assert table.labels.tolist() == [[0, 1, 0, 0, 0, 0, 0, 1]]

    def test_column_order_in_file_does_not_matter(self, tmp_path):
        """Test labels are mapped by header name."""
        names = [f.value for f in FINDINGS]
        header = ",".join(["id", *reversed(names)])
        path = tmp_path / "labels.csv"
        path.write_text(f"{header}\nb,1,0,0,0,0,0,0,0\n")
        table = load_labels(path)
        assert table.column(Finding.FOREIGN_OBJECT).tolist() == [1]
        assert table.column(Finding.PLEURAL_EFFUSION).tolist() == [0]

    def test_missing_column(self, tmp_path):
        """Test a missing finding column is reported."""
        path = tmp_path / "labels.csv"
        path.write_text("id,pleural_effusion\na,1\n")
        with pytest.raises(LabelFormatError, match="infiltrate"):
            load_labels(path)

    def test_non_binary_cell(self, tmp_path):
        """Test cells other than 0/1 are rejected with the row named."""
        path = tmp_path / "labels.csv"
        path.write_text(get_label_csv_text(["a,0,0,0,0,0,0,0,0", "b,0,2,0,0,0,0,0,0"]))
        with pytest.raises(LabelFormatError, match="'b'"):
            load_labels(path)

    def test_empty_cell(self, tmp_path):
        """Test empty cells are not treated as zero."""
        path = tmp_path / "labels.csv"
        path.write_text(get_label_csv_text(["a,0,,0,0,0,0,0,0"]))
        with pytest.raises(LabelFormatError):
            load_labels(path)

    def test_duplicate_ids(self, tmp_path):
        """Test duplicate ids are rejected."""
        path = tmp_path / "labels.csv"
        path.write_text(get_label_csv_text(["a,0,0,0,0,0,0,0,0", "a,1,0,0,0,0,0,0,0"]))
        with pytest.raises(LabelFormatError, match="Duplicate"):
            load_labels(path)

    def test_unreadable_file(self, tmp_path):
        """Test a missing file."""
        with pytest.raises(LabelFormatError):
            load_labels(tmp_path / "missing.csv")

    def test_to_csv_then_load(self, tmp_path):
        """Test the written schema is readable."""
        table = get_label_table(12)
        table.to_csv(tmp_path / "t.csv")
        loaded = load_labels(tmp_path / "t.csv")
        assert loaded.sample_ids == table.sample_ids
        np.testing.assert_array_equal(loaded.labels, table.labels)

    def test_rows_by_id(self):
        """Test rows follow the requested order and unknown ids fail."""
        table = get_label_table(5)
        np.testing.assert_array_equal(table.rows(["s001", "s000"]), table.labels[[1, 0]])
        with pytest.raises(LabelFormatError):
            table.rows(["nope"])


class TestPrevalence:
    """Test prevalence statistics."""

    def test_reference_fixture_counts(self):
        """Test the bundled label file reproduces the reference counts."""
        table = load_labels(INDIANA_LABELS)
        assert len(table) == INDIANA_STUDY_COUNT
        for finding, count in INDIANA_POSITIVE_COUNTS.items():
            assert int(table.column(finding).sum()) == count

    def test_reference_fixture_prevalence(self):
        """Test prevalences match the reference percentages to one decimal."""
        table = load_labels(INDIANA_LABELS)
        for finding, pct in REFERENCE_PREVALENCE_PCT.items():
            assert round(100.0 * prevalence(table, finding), 1) == pct

    def test_prevalence_table(self):
        """Test positive plus negative equals the sample count."""
        table = get_label_table(20)
        frame = prevalence_table(table)
        assert list(frame.index) == [f.value for f in FINDINGS]
        assert (frame["positive"] + frame["negative"] == 20).all()

    def test_empty_table(self):
        """Test prevalence of an empty table is an error."""
        empty = LabelTable((), np.zeros((0, len(FINDINGS))))
        with pytest.raises(LabelFormatError):
            prevalence(empty, Finding.MASS)

    def test_synthesize_labels_exact_marginals(self):
        """Test synthetic tables have exact per-finding counts."""
        counts = {Finding.MASS: 7, Finding.PNEUMOTHORAX: 1}
        table = synthesize_labels(counts, 50, seed=3)
        assert int(table.column(Finding.MASS).sum()) == 7
        assert int(table.column(Finding.PNEUMOTHORAX).sum()) == 1
        assert int(table.column(Finding.INFILTRATE).sum()) == 0
        assert synthesize_labels(counts, 50, seed=3).labels.tolist() == table.labels.tolist()


class TestMakeSplits:
    """Test unstratified resampling."""

    @pytest.fixture
    def ids(self):
        """Ten sample ids."""
        return [f"id{i}" for i in range(10)]

    def test_sizes_and_partition(self, ids):
        """Test 7/3 partitions covering every id once."""
        plan = make_splits(ids, n_resamples=5, train_frac=0.7, seed=0)
        assert plan.n_resamples == 5
        for r in plan.resamples:
            assert len(r.train_ids) == 7
            assert len(r.test_ids) == 3
            assert set(r.train_ids).isdisjoint(r.test_ids)
            assert set(r.train_ids) | set(r.test_ids) == set(ids)

    def test_ids_keep_source_order(self, ids):
        """Test partitions preserve the input order."""
        for r in make_splits(ids, 3).resamples:
            assert list(r.train_ids) == [i for i in ids if i in r.train_ids]
            assert list(r.test_ids) == [i for i in ids if i in r.test_ids]

    def test_determinism(self, ids):
        """Test equal inputs give equal plans and seeds differ."""
        assert make_splits(ids, 5, seed=1) == make_splits(ids, 5, seed=1)
        assert make_splits(ids, 5, seed=1) != make_splits(ids, 5, seed=2)

    def test_resample_independent_of_count(self, ids):
        """Test resample r does not depend on how many are requested."""
        assert make_splits(ids, 2).resamples == make_splits(ids, 5).resamples[:2]

    def test_test_membership_frequency(self):
        """Test each id lands in test about 30% of the time."""
        ids = [f"id{i:03d}" for i in range(100)]
        plan = make_splits(ids, n_resamples=1000, train_frac=0.7, seed=0)
        hits = dict.fromkeys(ids, 0)
        for r in plan.resamples:
            for sample_id in r.test_ids:
                hits[sample_id] += 1
        for count in hits.values():
            assert abs(count / 1000 - 0.3) < 0.06

    def test_two_ids(self):
        """Test the smallest splittable list."""
        r = make_splits(["a", "b"], 1, train_frac=0.9).resamples[0]
        assert (len(r.train_ids), len(r.test_ids)) == (1, 1)

    def test_invalid_requests(self, ids):
        """Test split errors."""
        with pytest.raises(SplitError):
            make_splits(["only"], 1)
        with pytest.raises(SplitError):
            make_splits(ids, 1, train_frac=1.0)
        with pytest.raises(SplitError):
            make_splits(["a", "a", "b"], 1)

    def test_save_and_load(self, ids, tmp_path):
        """Test the YAML split file."""
        plan = make_splits(ids, 3, seed=4)
        plan.save(tmp_path / "splits.yaml")
        assert SplitPlan.load(tmp_path / "splits.yaml") == plan

    def test_load_rejects_unknown_version(self, tmp_path):
        """Test version checking of split files."""
        path = tmp_path / "splits.yaml"
        path.write_text("version: 99\nresamples: []\n")
        with pytest.raises(SplitError):
            SplitPlan.load(path)


class TestMaterializeVariant:
    """Test the four image variants."""

    @pytest.fixture
    def ops(self):
        """Operators with a three-pixel lung border."""
        return PreprocessingOps.from_config(PreprocessConfig(lung_border=3))

    def test_normal_is_identity(self, ops):
        """Test normal returns the input pixels."""
        img = get_smooth_bump(32)
        assert materialize_variant(img, Variant.NORMAL, ops) == img

    def test_bone_suppressed(self, ops):
        """Test bone_suppressed applies suppression only."""
        img, _ = get_two_field_image()
        expected = suppress_bones(img, 1.0, 2.0, 8.0)
        assert materialize_variant(img, Variant.BONE_SUPPRESSED, ops) == expected

    def test_lung_crop_dimensions(self, ops):
        """Test the crop is the tight box grown by the border."""
        img, tight = get_two_field_image()
        out = materialize_variant(img, Variant.LUNG_CROPPED, ops)
        assert (out.width, out.height) == (tight.width + 6, tight.height + 6)
        assert (out.width, out.height) == (54, 46)

    def test_combined_is_suppression_then_crop(self, ops):
        """Test combined composes suppression before segmentation."""
        img, _ = get_two_field_image()
        suppressed = ops.suppress_bones(img)
        expected = crop(suppressed, ops.lung_box(suppressed))
        assert materialize_variant(img, Variant.COMBINED, ops) == expected

    def test_failed_segmentation_falls_back(self, ops):
        """Test a uniform image is returned uncropped with the fallback flag."""
        img = Image(np.full((16, 16), 0.5))
        out, fallback = materialize_with_status(img, Variant.LUNG_CROPPED, ops)
        assert fallback
        assert out == img

    def test_operators_are_replaceable(self):
        """Test custom callables are used in place of the bundled proxies."""
        calls = []

        def fake_suppress(img, strength, sigma1, sigma2):
            calls.append(strength)
            return Image(np.zeros_like(img.pixels))

        ops = PreprocessingOps(strength=0.5, suppress=fake_suppress)
        out = materialize_variant(get_smooth_bump(8), Variant.BONE_SUPPRESSED, ops)
        assert calls == [0.5]
        assert np.all(out.pixels == 0.0)

    def test_preprocess_config_sigma_order(self):
        """Test sigma1 must be below sigma2."""
        with pytest.raises(ValueError):
            PreprocessConfig(sigma1=8.0, sigma2=2.0)


class TestVariantCache:
    """Test the on-disk variant store."""

    @pytest.fixture
    def cache(self, tmp_path):
        """Empty cache under a temporary directory."""
        return VariantCache(tmp_path / "cache", "abcdef0123456789ffff")

    def test_store_and_load(self, cache):
        """Test a stored variant reads back bit-identical."""
        img = get_smooth_bump(16)
        path = cache.store("s1", Variant.COMBINED, img)
        assert path.is_file()
        assert path.parent.parent.name == "abcdef0123456789"
        assert cache.has("s1", Variant.COMBINED)
        assert cache.load("s1", Variant.COMBINED) == img
        assert not list(path.parent.glob("*.tmp"))

    def test_missing_entries(self, cache):
        """Test missing enumerates ids by variant."""
        cache.store("s1", Variant.NORMAL, get_smooth_bump(8))
        missing = cache.missing(["s1", "s2"], [Variant.NORMAL, Variant.LUNG_CROPPED])
        assert missing == [
            ("s1", Variant.LUNG_CROPPED),
            ("s2", Variant.NORMAL),
            ("s2", Variant.LUNG_CROPPED),
        ]

    def test_load_missing_entry(self, cache):
        """Test reading an absent entry."""
        with pytest.raises(CacheError):
            cache.load("nope", Variant.NORMAL)

    def test_unusable_sample_id(self, cache):
        """Test ids that are not plain file names."""
        with pytest.raises(CacheError):
            cache.path_for("../escape", Variant.NORMAL)
        with pytest.raises(CacheError):
            cache.path_for("", Variant.NORMAL)


class TestInputFiles:
    """Test image lookup and content digests of the inputs."""

    def test_resolve_image(self, tmp_path):
        """Test supported suffixes are searched."""
        (tmp_path / "a.png").write_bytes(b"")
        assert resolve_image(tmp_path, "a") == tmp_path / "a.png"
        assert resolve_image(tmp_path, "b") is None

    def test_digest_follows_content(self, tmp_path):
        """Test the digests change with file contents, not with repeated reads."""
        images = tmp_path / "images"
        images.mkdir()
        labels = tmp_path / "labels.csv"
        labels.write_text("x\n", encoding="utf-8")
        (images / "a.pgm").write_bytes(b"one")
        first = digest_inputs(labels, images, ["a", "b"])
        assert first == digest_inputs(labels, images, ["a", "b"])

        (images / "a.pgm").write_bytes(b"two")
        rewritten = digest_inputs(labels, images, ["a", "b"])
        assert rewritten.images != first.images
        assert rewritten.labels == first.labels

        (images / "b.png").write_bytes(b"late")
        assert digest_inputs(labels, images, ["a", "b"]).images != rewritten.images

        labels.write_text("y\n", encoding="utf-8")
        assert digest_inputs(labels, images, ["a", "b"]).labels != first.labels

    def test_missing_label_file(self, tmp_path):
        """Test an unreadable label file is a label error."""
        with pytest.raises(LabelFormatError):
            digest_inputs(tmp_path / "absent.csv", tmp_path, [])
