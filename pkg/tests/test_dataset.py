import numpy as np
import pytest

from core.errors import (
    CsvParseError,
    CsvStructureError,
    DegenerateFeatureError,
    EmptyInputError,
    ParameterError,
)
from data.catalog import SYNTHETIC_ID, dataset_ids, load_dataset, resolve_profile
from data.dataset import (
    Dataset,
    FoldPlan,
    SyntheticSpec,
    apply_zscore,
    blob_labels,
    denormalize,
    gen_synthetic,
    kfold_split,
    load_csv,
    normalize_zscore,
)


class TestLoadCsv:
    def test_plain_numeric_file(self, write_csv):
        d = load_csv(write_csv("plain.csv", "1,2\n3,4\n"))
        assert d.n_rows == 2 and d.n_features == 2
        np.testing.assert_array_equal(d.rows, [[1.0, 2.0], [3.0, 4.0]])

    def test_non_numeric_cell_names_row_and_column(self, write_csv):
        with pytest.raises(CsvParseError) as exc:
            load_csv(write_csv("bad.csv", "1,x\n"))
        assert exc.value.row == 1
        assert exc.value.column == 2

    def test_ragged_rows(self, write_csv):
        with pytest.raises(CsvStructureError):
            load_csv(write_csv("ragged.csv", "1,2\n3\n"))

    def test_empty_file(self, write_csv):
        with pytest.raises(EmptyInputError):
            load_csv(write_csv("empty.csv", ""))

    def test_header_and_label_column(self, write_csv):
        path = write_csv("labelled.csv", "a,b,label\n1,2,setosa\n3,4,virginica\n5,6,setosa\n")
        d = load_csv(path, has_header=True, drop_last_column=True)
        assert d.feature_names == ["a", "b"]
        np.testing.assert_array_equal(d.rows[:, 0], [1.0, 3.0, 5.0])

    def test_drop_leading_id_columns(self, write_csv):
        d = load_csv(write_csv("ids.csv", "7,1,10,20\n8,2,30,40\n"), drop_first_columns=2)
        np.testing.assert_array_equal(d.rows, [[10.0, 20.0], [30.0, 40.0]])

    def test_blank_lines_are_skipped(self, write_csv):
        d = load_csv(write_csv("blank.csv", "1,2\n\n3,4\n"))
        assert d.n_rows == 2

    def test_utf8_byte_order_mark(self, write_csv):
        d = load_csv(write_csv("bom.csv", "\ufeffx,y\n1,2\n3,4\n"), has_header=True)
        assert d.feature_names == ["x", "y"]
        np.testing.assert_array_equal(d.rows, [[1.0, 2.0], [3.0, 4.0]])
        plain = load_csv(write_csv("bom-plain.csv", "\ufeff1,2\n3,4\n"))
        np.testing.assert_array_equal(plain.rows, [[1.0, 2.0], [3.0, 4.0]])


class TestCatalog:
    def test_profile_flags_from_file_name(self, write_csv):
        rows = "\n".join(f"{i},{i + 1},{i + 2},{i * 2},Iris-setosa" for i in range(6))
        path = write_csv("iris.csv", "sl,sw,pl,pw,class\n" + rows + "\n")
        d = load_dataset(path)
        assert d.source_id == "iris"
        assert d.n_features == 4

    def test_explicit_flags_win(self, write_csv):
        path = write_csv("glass.csv", "1,1.5,2.5,1\n2,1.6,2.6,2\n")
        d = load_dataset(path, drop_first_columns=0, drop_last_column=False)
        assert d.n_features == 4

    def test_unknown_file_has_no_profile(self):
        assert resolve_profile("/tmp/measurements.csv") is None

    def test_synthetic_reference(self):
        assert load_dataset(SYNTHETIC_ID).n_rows == 450
        assert SYNTHETIC_ID in dataset_ids()


class TestNormalize:
    def test_hand_column(self):
        d, params = normalize_zscore(Dataset(np.array([[1.0], [2.0], [3.0]])))
        np.testing.assert_allclose(d.rows[:, 0], [-1.0, 0.0, 1.0], atol=1e-12)
        assert params.stds[0] == pytest.approx(1.0)

    def test_idempotent_on_normalized_data(self, rng):
        once, _ = normalize_zscore(Dataset(rng.normal(size=(30, 3))))
        twice, _ = normalize_zscore(once)
        np.testing.assert_allclose(twice.rows, once.rows, atol=1e-12)

    def test_constant_column(self):
        with pytest.raises(DegenerateFeatureError) as exc:
            normalize_zscore(Dataset(np.array([[5.0, 1.0], [5.0, 2.0], [5.0, 3.0]]), ["const", "x"]))
        assert exc.value.column == "const"

    def test_denormalize_and_reapply(self, rng):
        raw = Dataset(rng.normal(3.0, 2.0, size=(25, 2)))
        d, params = normalize_zscore(raw)
        np.testing.assert_allclose(denormalize(d.rows, params), raw.rows, atol=1e-12)
        np.testing.assert_array_equal(apply_zscore(raw, params).rows, d.rows)


class TestKfold:
    def test_exact_division(self):
        plan = kfold_split(10, 5, seed=1)
        assert plan.fold_sizes() == [2] * 5
        union = np.concatenate([plan.fold_indices(f) for f in range(5)])
        assert sorted(union.tolist()) == list(range(10))

    def test_remainder(self):
        assert sorted(kfold_split(11, 5, seed=1).fold_sizes()) == [2, 2, 2, 2, 3]

    def test_deterministic(self):
        a = kfold_split(37, 5, seed=9)
        b = kfold_split(37, 5, seed=9)
        np.testing.assert_array_equal(a.assignments, b.assignments)

    def test_train_test_partition(self):
        plan = kfold_split(12, 3, seed=0)
        train, test = plan.train_test(1)
        assert set(train).isdisjoint(test)
        assert len(train) + len(test) == 12

    @pytest.mark.parametrize("k", [1, 11])
    def test_invalid_k(self, k):
        with pytest.raises(ParameterError):
            kfold_split(10, k, seed=0)

    def test_json_round_trip(self):
        plan = kfold_split(9, 3, seed=4)
        again = FoldPlan.from_dict(plan.to_dict())
        np.testing.assert_array_equal(again.assignments, plan.assignments)


class TestSynthetic:
    def test_default_shape(self):
        d = gen_synthetic(SyntheticSpec())
        assert (d.n_rows, d.n_features) == (450, 2)

    def test_zero_std_hits_centers(self):
        spec = SyntheticSpec(blob_stds=[0.0] * 9)
        d = gen_synthetic(spec)
        centers = np.asarray(spec.blob_centers)
        np.testing.assert_array_equal(d.rows, centers[blob_labels(spec)])

    def test_blob_means_near_centers(self):
        spec = SyntheticSpec()
        d = gen_synthetic(spec)
        labels = blob_labels(spec)
        z = []
        for j, (center, std) in enumerate(zip(spec.blob_centers, spec.blob_stds)):
            mean = d.rows[labels == j].mean(axis=0)
            z.extend(np.abs(mean - center) / (std / np.sqrt(spec.points_per_blob)))
        z = np.asarray(z)
        assert z.size == 18
        # 3-sigma per coordinate, one excursion tolerated across the 18 means
        assert np.sum(z > 3.0) <= 1
        assert z.max() < 4.5

    def test_same_seed_bit_identical(self):
        np.testing.assert_array_equal(gen_synthetic(SyntheticSpec(seed=5)).rows,
                                      gen_synthetic(SyntheticSpec(seed=5)).rows)

    def test_mismatched_stds(self):
        with pytest.raises(ParameterError):
            SyntheticSpec(blob_stds=[0.5] * 3)
