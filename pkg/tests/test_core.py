import json

import numpy as np
import pytest

from lazynn.core import (
    Dataset,
    FeatureSchema,
    fit_normalizer,
    load_csv,
    load_schema,
    stratified_folds,
)


@pytest.fixture
def two_col_schema():
    return FeatureSchema((("Amount", "numeric"), ("Rate", "numeric")), "Class")


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


class TestSchema:
    def test_defaults_weights_to_one(self, two_col_schema):
        assert two_col_schema.weights == (1.0, 1.0)

    def test_rejects_duplicate_names(self):
        with pytest.raises(ValueError, match="unique"):
            FeatureSchema((("a", "numeric"), ("a", "numeric")), "y")

    def test_rejects_label_in_features(self):
        with pytest.raises(ValueError, match="label"):
            FeatureSchema((("a", "numeric"),), "a")

    def test_rejects_negative_weights(self):
        with pytest.raises(ValueError, match="non-negative"):
            FeatureSchema((("a", "numeric"),), "y", weights=(-1.0,))

    def test_rejects_empty_features(self):
        with pytest.raises(ValueError, match="at least one"):
            FeatureSchema((), "y")

    def test_manifest_round_trip(self, tmp_path):
        manifest = {
            "features": [
                {"name": "Amount", "kind": "numeric"},
                {"name": "Colour", "kind": "categorical"},
            ],
            "label": "Class",
            "weights": {"Amount": 2.0},
        }
        p = write(tmp_path, "schema.json", json.dumps(manifest))
        schema = load_schema(p)
        assert schema.names == ("Amount", "Colour")
        assert schema.weights == (2.0, 1.0)
        assert schema.label_column == "Class"


class TestLoadCsv:
    def test_parses_two_rows(self, tmp_path, two_col_schema):
        p = write(tmp_path, "d.csv", "Amount,Rate,Class\n1.5,2,yes\n3,4.25,no\n")
        data = load_csv(p, two_col_schema)
        assert data.n == 2
        assert np.allclose(data.numeric, [[1.5, 2.0], [3.0, 4.25]])
        assert data.label_names == ("yes", "no")
        assert data.labels.tolist() == [0, 1]

    def test_row_order_is_preserved(self, tmp_path, two_col_schema):
        rows = "\n".join(f"{i},{i * 2},c" for i in range(10))
        p = write(tmp_path, "d.csv", f"Amount,Rate,Class\n{rows}\n")
        data = load_csv(p, two_col_schema)
        assert data.numeric[:, 0].tolist() == list(map(float, range(10)))

    def test_bad_numeric_cell_names_row_and_column(self, tmp_path, two_col_schema):
        p = write(tmp_path, "d.csv", "Amount,Rate,Class\n1,2,yes\nabc,4,no\n")
        with pytest.raises(ValueError, match=r"row 3.*'Amount'"):
            load_csv(p, two_col_schema)

    def test_header_only_is_an_error(self, tmp_path, two_col_schema):
        p = write(tmp_path, "d.csv", "Amount,Rate,Class\n")
        with pytest.raises(ValueError, match="no data rows"):
            load_csv(p, two_col_schema)

    def test_missing_file(self, tmp_path, two_col_schema):
        with pytest.raises(FileNotFoundError):
            load_csv(tmp_path / "absent.csv", two_col_schema)

    def test_header_mismatch(self, tmp_path, two_col_schema):
        p = write(tmp_path, "d.csv", "Amount,Wrong,Class\n1,2,yes\n")
        with pytest.raises(ValueError, match="header"):
            load_csv(p, two_col_schema)

    def test_missing_value_is_an_error(self, tmp_path, two_col_schema):
        p = write(tmp_path, "d.csv", "Amount,Rate,Class\n1,,yes\n")
        with pytest.raises(ValueError, match="missing value"):
            load_csv(p, two_col_schema)

    def test_categorical_interned_in_first_appearance_order(self, tmp_path):
        schema = FeatureSchema((("Colour", "categorical"),), "Class")
        p = write(tmp_path, "d.csv", "Colour,Class\nred,a\nblue,a\nred,b\n")
        data = load_csv(p, schema)
        assert data.cat_values == (("red", "blue"),)
        assert data.categorical[:, 0].tolist() == [0, 1, 0]

    def test_columns_matched_by_name_not_position(self, tmp_path, two_col_schema):
        p = write(tmp_path, "d.csv", "Class,Rate,Amount\nyes,2,1\n")
        data = load_csv(p, two_col_schema)
        assert data.numeric[0].tolist() == [1.0, 2.0]

    def test_regression_targets(self, tmp_path):
        schema = FeatureSchema((("x", "numeric"),), "y", task="regression")
        p = write(tmp_path, "d.csv", "x,y\n1,0.5\n2,1.5\n")
        data = load_csv(p, schema)
        assert data.labels is None
        assert data.targets.tolist() == [0.5, 1.5]


class TestNormalizer:
    def test_min_max_endpoints(self, blob_dataset):
        schema = FeatureSchema((("v", "numeric"),), "y")
        data = Dataset(schema, np.array([[2.0], [4.0], [6.0]]),
                       np.zeros((3, 0), dtype=np.int32), (), np.array([0, 0, 0]), ("c",))
        norm = fit_normalizer(data)
        out = norm.transform(data)
        assert out.numeric[:, 0].tolist() == [0.0, 0.5, 1.0]

    def test_constant_column_maps_to_zero(self):
        schema = FeatureSchema((("v", "numeric"),), "y")
        data = Dataset(schema, np.array([[5.0], [5.0], [5.0]]),
                       np.zeros((3, 0), dtype=np.int32), (), np.array([0, 0, 0]), ("c",))
        norm = fit_normalizer(data)
        assert norm.transform(data).numeric[:, 0].tolist() == [0.0, 0.0, 0.0]

    def test_out_of_range_query_not_clamped(self):
        schema = FeatureSchema((("v", "numeric"),), "y")
        data = Dataset(schema, np.array([[2.0], [4.0], [6.0]]),
                       np.zeros((3, 0), dtype=np.int32), (), np.array([0, 0, 0]), ("c",))
        norm = fit_normalizer(data)
        assert norm.transform_matrix(np.array([8.0])) == pytest.approx(1.5)

    def test_round_trip_hits_zero_and_one(self):
        rng = np.random.default_rng(3)
        x = rng.normal(size=(50, 4)) * 10
        schema = FeatureSchema(tuple((f"f{i}", "numeric") for i in range(4)), "y")
        data = Dataset(schema, x, np.zeros((50, 0), dtype=np.int32), (),
                       np.zeros(50, dtype=np.int64), ("c",))
        out = fit_normalizer(data).transform(data)
        assert np.allclose(out.numeric.min(axis=0), 0.0)
        assert np.allclose(out.numeric.max(axis=0), 1.0)

    def test_schema_mismatch_rejected(self):
        schema = FeatureSchema((("v", "numeric"),), "y")
        data = Dataset(schema, np.array([[2.0], [4.0]]),
                       np.zeros((2, 0), dtype=np.int32), (), np.array([0, 0]), ("c",))
        norm = fit_normalizer(data)
        with pytest.raises(ValueError, match="width"):
            norm.transform_matrix(np.array([[1.0, 2.0]]))


def _tiny_dataset(labels):
    labels = np.asarray(labels)
    schema = FeatureSchema((("v", "numeric"),), "y")
    names = tuple(f"c{i}" for i in range(int(labels.max()) + 1))
    return Dataset(schema, np.arange(len(labels), dtype=float)[:, None],
                   np.zeros((len(labels), 0), dtype=np.int32), (), labels, names)


class TestStratifiedFolds:
    def test_perfect_stratification(self):
        data = _tiny_dataset([0] * 5 + [1] * 5)
        plan = stratified_folds(data, 5, seed=0)
        for f in range(5):
            test = plan.test_indices(f)
            assert test.size == 2
            assert data.labels[test].sum() == 1  # one of each class

    def test_uneven_classes_within_one_sample(self):
        data = _tiny_dataset([0] * 5 + [1] * 4)
        plan = stratified_folds(data, 3, seed=1)
        for f in range(3):
            fold_labels = data.labels[plan.test_indices(f)]
            for cls, total in ((0, 5), (1, 4)):
                count = int(np.sum(fold_labels == cls))
                assert abs(count - total / 3) <= 1

    def test_deterministic_for_fixed_seed(self):
        data = _tiny_dataset([0] * 6 + [1] * 6)
        a = stratified_folds(data, 3, seed=9)
        b = stratified_folds(data, 3, seed=9)
        assert np.array_equal(a.assignments, b.assignments)

    def test_partition_covers_everything_once(self):
        data = _tiny_dataset([0] * 7 + [1] * 9)
        plan = stratified_folds(data, 4, seed=2)
        seen = np.concatenate([plan.test_indices(f) for f in range(4)])
        assert sorted(seen.tolist()) == list(range(16))

    def test_k_too_small(self):
        data = _tiny_dataset([0, 0, 1, 1])
        with pytest.raises(ValueError, match="at least 2"):
            stratified_folds(data, 1, seed=0)

    def test_class_rarer_than_k(self):
        data = _tiny_dataset([0, 0, 0, 1])
        with pytest.raises(ValueError, match="fewer than"):
            stratified_folds(data, 2, seed=0)
