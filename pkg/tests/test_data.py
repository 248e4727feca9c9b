import numpy as np
import pytest

from autotab.data import (build_dataset, dataset_from_arrays,
                          dataset_from_raw_with_schema, expand_datetime,
                          parse_column, read_csv)
from autotab.errors import DataError

from conftest import write_csv


class TestReadCsv:
    def test_direct_parse(self, tmp_path):
        path = write_csv(tmp_path / "t.csv", ["a", "b"], [[1, "x"], [2, "y"]])
        raw = read_csv(path, target_name="b")
        assert raw.n_rows == 2
        assert raw.column("a") == ("1", "2")
        assert raw.column("b") == ("x", "y")

    def test_missing_tokens(self, tmp_path):
        path = write_csv(tmp_path / "t.csv", ["a", "y"],
                         [["NA", 0], ["", 1], ["null", 0], ["None", 1], ["nan", 0], [5, 1]])
        raw = read_csv(path)
        assert raw.column("a") == (None, None, None, None, None, "5")

    def test_ragged_row_reports_index(self, tmp_path):
        path = tmp_path / "t.csv"
        path.write_text("a,b\n1,2\n1,2,3\n")
        with pytest.raises(DataError, match="row 2"):
            read_csv(str(path))

    def test_missing_file(self):
        with pytest.raises(DataError):
            read_csv("/no/such/file.csv")

    def test_absent_target_rejected(self, tmp_path):
        path = write_csv(tmp_path / "t.csv", ["a"], [[1]])
        with pytest.raises(DataError, match="zz"):
            read_csv(path, target_name="zz")

    def test_quoted_cells_rfc4180(self, tmp_path):
        path = tmp_path / "t.csv"
        path.write_text('a,b\n"x,1",2\n"say ""hi""",3\n')
        raw = read_csv(str(path))
        assert raw.column("a") == ("x,1", 'say "hi"')

    def test_hint_for_unknown_column_rejected(self, tmp_path):
        path = write_csv(tmp_path / "t.csv", ["a"], [[1]])
        with pytest.raises(DataError):
            read_csv(path, hints={"ghost": "numeric"})


class TestParseCascade:
    def test_integer_column(self):
        col, entry = parse_column("a", ("1", "2", "3"))
        assert col.kind == "numeric"
        assert col.values.tolist() == [1.0, 2.0, 3.0]
        assert not col.from_float_literals

    def test_float_column_flags_fraction(self):
        col, _ = parse_column("a", ("1.5", "2.0"))
        assert col.kind == "numeric"
        assert col.from_float_literals

    def test_iso_date(self):
        col, entry = parse_column("a", ("2021-01-02", "2021-02-03"))
        assert col.kind == "datetime"
        assert entry["format"] == "%Y-%m-%d"

    def test_epoch_seconds_become_datetime(self):
        cells = tuple(str(v) for v in (1_600_000_000, 1_600_086_400, 1_600_172_800))
        col, _ = parse_column("a", cells)
        assert col.kind == "datetime"

    def test_mixed_text_becomes_category(self):
        col, _ = parse_column("a", ("x", "y", "x"))
        assert col.kind == "category"
        assert col.values.tolist() == [0, 1, 0]

    def test_dotted_european_dates(self):
        col, entry = parse_column("a", ("02.01.2021", "03.02.2021"))
        assert col.kind == "datetime"
        assert entry["format"] == "%d.%m.%Y"


class TestBuildDataset:
    def test_numeric_parse(self, tmp_path):
        path = write_csv(tmp_path / "t.csv", ["a", "y"],
                         [[1, 0], [2, 1], [3, 0], [4, 1]])
        ds = build_dataset(read_csv(path, "y"), "y", "binary")
        assert ds.columns["a"].values.tolist() == [1.0, 2.0, 3.0, 4.0]

    def test_constant_column_dropped(self, tmp_path):
        path = write_csv(tmp_path / "t.csv", ["a", "y"],
                         [["x", 0], ["x", 1], ["x", 0]])
        ds = build_dataset(read_csv(path, "y"), "y", "binary")
        assert "a" not in ds.columns
        assert ds.roles["a"] == "drop"

    def test_datetime_expanded(self, tmp_path):
        path = write_csv(tmp_path / "t.csv", ["d", "y"],
                         [["2021-01-02", 0], ["2021-02-03", 1], ["2022-03-04", 0]])
        ds = build_dataset(read_csv(path, "y"), "y", "binary")
        assert "d" not in ds.columns
        assert ds.roles["d"] == "datetime"
        assert "d__year" in ds.columns or ds.roles.get("d__year") == "drop"
        assert "d__day" in ds.columns

    def test_missing_target_is_hard_error(self, tmp_path):
        path = write_csv(tmp_path / "t.csv", ["a", "y"], [[1, 0], [2, ""]])
        with pytest.raises(DataError, match="target"):
            build_dataset(read_csv(path, "y"), "y", "binary")

    def test_binary_needs_two_labels(self, tmp_path):
        path = write_csv(tmp_path / "t.csv", ["a", "y"], [[1, 0], [2, 0]])
        with pytest.raises(DataError):
            build_dataset(read_csv(path, "y"), "y", "binary")

    def test_labels_stored_sorted(self, tmp_path):
        path = write_csv(tmp_path / "t.csv", ["a", "y"],
                         [[1, "yes"], [2, "no"], [3, "yes"]])
        ds = build_dataset(read_csv(path, "y"), "y", "binary")
        assert ds.task.labels == ("no", "yes")
        assert ds.target.tolist() == [1, 0, 1]

    def test_small_class_warning(self, tmp_path):
        rows = [[i, "a"] for i in range(10)] + [[i, "b"] for i in range(10)] + [[99, "c"]]
        rows = [[r[0] + j, r[1]] for j, r in enumerate(rows)]
        path = write_csv(tmp_path / "t.csv", ["a", "y"], rows)
        ds = build_dataset(read_csv(path, "y"), "y", "multiclass")
        assert any("stratification" in w for w in ds.meta.warnings)

    def test_role_hints_override(self, tmp_path):
        path = write_csv(tmp_path / "t.csv", ["a", "b", "y"],
                         [[1, 5, 0], [2, 6, 1], [3, 7, 0]])
        ds = build_dataset(read_csv(path, "y"), "y", "binary",
                           hints={"a": "category", "b": "drop"})
        assert ds.columns["a"].kind == "category"
        assert ds.roles["b"] == "drop"

    def test_missing_rate_matches_mask(self, tmp_path):
        path = write_csv(tmp_path / "t.csv", ["a", "y"],
                         [[1, 0], ["NA", 1], [3, 0], [4, 1]])
        ds = build_dataset(read_csv(path, "y"), "y", "binary")
        assert ds.meta.missing_rates["a"] == pytest.approx(0.25)

    def test_deterministic_rebuild(self, tmp_path):
        path = write_csv(tmp_path / "t.csv", ["a", "b", "y"],
                         [[1.5, "u", 0], [2.5, "v", 1], ["NA", "u", 0], [4.0, "w", 1]])
        raw = read_csv(path, "y")
        d1 = build_dataset(raw, "y", "binary")
        d2 = build_dataset(raw, "y", "binary")
        for name in d1.columns:
            a, b = d1.columns[name].values, d2.columns[name].values
            assert np.array_equal(a, b, equal_nan=(a.dtype.kind == "f"))


class TestExpandDatetime:
    def test_calendar_parts(self):
        col, _ = parse_column("d", ("2021-01-02",))
        parts = {c.name: c.values[0] for c in expand_datetime(col)}
        assert parts["d__year"] == 2021
        assert parts["d__month"] == 1
        assert parts["d__day"] == 2
        assert parts["d__weekday"] == 5  # Saturday, Monday == 0
        assert parts["d__hour"] == 0

    def test_equal_timestamps_identical_rows(self):
        col, _ = parse_column("d", ("2021-06-01T10:30:00", "2021-06-01T10:30:00"))
        for part in expand_datetime(col):
            assert part.values[0] == part.values[1]

    def test_missing_propagates(self):
        col, _ = parse_column("d", ("2021-01-02", None))
        for part in expand_datetime(col):
            assert np.isnan(part.values[1])


class TestCategoryRecode:
    def test_unseen_category_maps_to_missing_code(self, tmp_path):
        train = write_csv(tmp_path / "train.csv", ["c", "y"],
                          [["a", 0], ["b", 1], ["a", 0], ["c", 1]])
        ds = build_dataset(read_csv(train, "y"), "y", "binary")
        test = write_csv(tmp_path / "test.csv", ["c"], [["b"], ["zz"], ["a"]])
        ds2 = dataset_from_raw_with_schema(read_csv(test), ds)
        assert ds2.columns["c"].values.tolist() == [1, -1, 0]

    def test_numeric_origin_category_recode(self):
        X = np.array([[1.0], [2.0], [1.0], [3.0]])
        ds = dataset_from_arrays(X, np.array([0, 1, 0, 1]), "binary",
                                 category_columns=["f0"])
        assert ds.columns["f0"].values.tolist() == [0, 1, 0, 2]

    def test_dataset_from_arrays_fraction_flag(self):
        ds = dataset_from_arrays(np.array([[1.5], [2.0]]), np.array([0, 1]), "binary")
        assert ds.columns["f0"].from_float_literals
        ds2 = dataset_from_arrays(np.array([[1.0], [2.0]]), np.array([0, 1]), "binary")
        assert not ds2.columns["f0"].from_float_literals
