import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from relabelsvm import (DataError, Dataset, FlipRecord, MissingValueError, NoiseSpec,
                        ParseError, SingleClassError, UnmappedLabelError,
                        inject_label_noise, load_dataset, make_folds, normalize)


def write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


class TestLoad:
    def test_basic_csv_with_mapping(self, tmp_path):
        path = write(tmp_path, "two.csv", "1.5,2.0,0\n3.0,4.0,1\n")
        d = load_dataset(path, label_column=-1, label_mapping={"0": -1, "1": 1})
        assert d.n == 2 and d.p == 2
        assert list(d.y) == [-1, 1]
        assert d.X[0, 0] == 1.5

    def test_row_order_preserved(self, tmp_path):
        rows = "\n".join(f"{i},{i % 2}" for i in range(10))
        d = load_dataset(write(tmp_path, "o.csv", rows), -1, {"0": -1, "1": 1})
        assert np.array_equal(d.X[:, 0], np.arange(10, dtype=float))

    def test_header_and_named_label_column(self, tmp_path):
        path = write(tmp_path, "h.csv", "a,b,cls\n1,2,-1\n3,4,1\n")
        d = load_dataset(path, label_column="cls")
        assert d.names == ("a", "b")
        assert list(d.y) == [-1, 1]

    def test_semicolon_and_tab_delimiters(self, tmp_path):
        d1 = load_dataset(write(tmp_path, "s.csv", "1;2;1\n3;4;-1\n"))
        d2 = load_dataset(write(tmp_path, "t.tsv", "1\t2\t1\n3\t4\t-1\n"))
        assert d1.p == d2.p == 2

    def test_libsvm_sparse(self, tmp_path):
        path = write(tmp_path, "sp.txt", "+1 1:0.5 3:2.0\n-1 2:1.0\n")
        d = load_dataset(path)
        assert d.p == 3
        assert d.X[0, 2] == 2.0 and d.X[1, 0] == 0.0

    def test_unmapped_label_names_row(self, tmp_path):
        path = write(tmp_path, "u.csv", "1,2,0\n3,4,weird\n")
        with pytest.raises(UnmappedLabelError, match="row 2"):
            load_dataset(path, -1, {"0": -1, "weird-but-different": 1})

    def test_missing_value_names_cell(self, tmp_path):
        path = write(tmp_path, "m.csv", "1,2,1\n3,,-1\n")
        with pytest.raises(MissingValueError, match="row 2"):
            load_dataset(path)

    def test_parse_error_names_cell(self, tmp_path):
        path = write(tmp_path, "p.csv", "1,2,1\n3,zap,-1\n")
        with pytest.raises(ParseError, match="row 2, column 2"):
            load_dataset(path)

    def test_dataset_roster_shapes(self, tmp_path):
        # loader handles the benchmark roster sizes (synthetic stand-in files)
        rng = np.random.default_rng(1)
        for name, n, p in (("australian", 690, 14), ("breastcancer", 683, 9)):
            rows = [",".join(f"{v:.3f}" for v in rng.standard_normal(p))
                    + f",{1 if i % 2 else -1}" for i in range(n)]
            d = load_dataset(write(tmp_path, f"{name}.csv", "\n".join(rows)), -1)
            assert (d.n, d.p) == (n, p)

    def test_single_class_loads_but_refuses_training_guard(self, tmp_path):
        path = write(tmp_path, "sc.csv", "1,1\n2,1\n")
        d = load_dataset(path)
        assert not d.has_both_classes
        with pytest.raises(SingleClassError):
            d.require_both_classes()


class TestDatasetInvariants:
    def test_rejects_tiny_or_bad_labels(self):
        with pytest.raises(DataError):
            Dataset(np.ones((1, 2)), np.array([1]))
        with pytest.raises(DataError):
            Dataset(np.ones((3, 2)), np.array([1, 0, -1]))

    def test_immutable(self):
        d = Dataset(np.ones((2, 2)), np.array([1, -1]))
        with pytest.raises(ValueError):
            d.X[0, 0] = 5.0


class TestNormalize:
    def test_minmax_example(self):
        d = Dataset(np.array([[0.0], [5.0], [10.0]]), np.array([1, -1, 1]))
        dn, _ = normalize(d, "minmax")
        assert np.allclose(dn.X[:, 0], [0.0, 0.5, 1.0])

    def test_none_is_identity(self):
        d = Dataset(np.array([[1.0], [2.0]]), np.array([1, -1]))
        dn, params = normalize(d, "none")
        assert np.array_equal(dn.X, d.X)
        assert params.constant_columns == ()

    def test_constant_column_passthrough_flagged(self):
        d = Dataset(np.array([[2.0, 1.0], [2.0, 2.0], [2.0, 3.0]]), np.array([1, -1, 1]))
        dn, params = normalize(d, "zscore")
        assert np.allclose(dn.X[:, 0], 2.0)
        assert params.constant_columns == (0,)

    def test_roundtrip(self, rng):
        X = rng.standard_normal((20, 4)) * 3.0 + 1.0
        d = Dataset(X, np.where(rng.random(20) < 0.5, 1, -1))
        for scheme in ("minmax", "zscore"):
            dn, params = normalize(d, scheme)
            back = params.invert(dn.X)
            assert np.max(np.abs(back - X) / np.maximum(1.0, np.abs(X))) < 1e-12

    def test_params_apply_same_transform_to_test_rows(self, rng):
        d = Dataset(rng.standard_normal((10, 3)), np.where(rng.random(10) < 0.5, 1, -1))
        d.y.setflags(write=False)
        dn, params = normalize(d, "minmax")
        test_X = rng.standard_normal((5, 3))
        assert np.allclose(params.transform(test_X),
                           (test_X - params.offset) / params.scale)


class TestNoise:
    def test_exact_count(self, rng):
        d = Dataset(rng.standard_normal((100, 2)), np.where(rng.random(100) < 0.5, 1, -1))
        noisy, record = inject_label_noise(d, NoiseSpec(rate=0.3, seed=5))
        assert len(record.indices) == 30
        assert int((noisy.y != d.y).sum()) == 30

    def test_rate_zero_identity(self, rng):
        d = Dataset(rng.standard_normal((10, 2)), np.where(rng.random(10) < 0.5, 1, -1))
        noisy, record = inject_label_noise(d, NoiseSpec(rate=0.0, seed=5))
        assert record.indices == ()
        assert np.array_equal(noisy.y, d.y)

    def test_deterministic(self, rng):
        d = Dataset(rng.standard_normal((50, 2)), np.where(rng.random(50) < 0.5, 1, -1))
        r1 = inject_label_noise(d, NoiseSpec(rate=0.2, seed=9))[1]
        r2 = inject_label_noise(d, NoiseSpec(rate=0.2, seed=9))[1]
        assert r1 == r2

    def test_original_untouched_and_only_flips_changed(self, rng):
        d = Dataset(rng.standard_normal((40, 2)), np.where(rng.random(40) < 0.5, 1, -1))
        before = d.y.copy()
        noisy, record = inject_label_noise(d, NoiseSpec(rate=0.25, seed=1))
        assert np.array_equal(d.y, before)
        changed = set(int(i) for i in np.flatnonzero(noisy.y != d.y))
        assert changed == set(record.indices)

    def test_bad_rate_rejected(self):
        with pytest.raises(DataError):
            NoiseSpec(rate=0.6, seed=0)

    def test_record_roundtrip(self):
        rec = FlipRecord(indices=(1, 5, 7), rate=0.3, seed=4)
        assert FlipRecord.from_lines(rec.to_lines()) == rec


class TestFolds:
    def test_even_split(self):
        plan = make_folds(10, 5, seed=1)
        sizes = sorted(len(plan.fold_indices(0, f)) for f in range(5))
        assert sizes == [2, 2, 2, 2, 2]

    def test_balanced_remainder(self):
        plan = make_folds(11, 5, seed=1)
        sizes = sorted(len(plan.fold_indices(0, f)) for f in range(5))
        assert sizes == [2, 2, 2, 2, 3]

    def test_cell_count(self):
        plan = make_folds(270, 5, repeats=5, seed=3)
        assert len(list(plan.cells())) == 25

    def test_k_too_large(self):
        with pytest.raises(DataError):
            make_folds(3, 5)

    def test_deterministic(self):
        a = make_folds(30, 4, repeats=2, seed=7)
        b = make_folds(30, 4, repeats=2, seed=7)
        assert np.array_equal(a.assignment, b.assignment)

    @settings(max_examples=40, deadline=None)
    @given(n=st.integers(4, 60), k=st.integers(2, 6), repeats=st.integers(1, 3))
    def test_partition_property(self, n, k, repeats):
        if k > n:
            return
        plan = make_folds(n, k, repeats, seed=11)
        for r in range(repeats):
            union = np.concatenate([plan.fold_indices(r, f) for f in range(k)])
            assert sorted(union.tolist()) == list(range(n))
            sizes = [len(plan.fold_indices(r, f)) for f in range(k)]
            assert max(sizes) - min(sizes) <= 1
