"""Dataset container, standardization, splitting, and CSV ingestion tests."""
import numpy as np
import pytest

from enetboost.data import (
    Dataset,
    IngestReport,
    Schema,
    apply_standardization,
    ingest_csv,
    kfold_random,
    kfold_stratified,
    load_csv,
    split_stratified,
    standardize,
    write_csv,
)
from enetboost.errors import (
    ConfigError,
    DataError,
    ParseError,
    SchemaError,
    StratificationError,
)


def make_binary(n, n_pos, seed=0, p=3):
    rng = np.random.default_rng(seed)
    y = np.zeros(n)
    y[:n_pos] = 1.0
    rng.shuffle(y)
    cols = [(f"x{j}", rng.normal(size=n)) for j in range(p)]
    return Dataset.from_columns(cols, target=("y", y))


class TestDataset:
    def test_duplicate_names_rejected(self):
        with pytest.raises(DataError):
            Dataset.from_columns([("a", [1.0]), ("a", [2.0])])

    def test_length_mismatch_rejected(self):
        with pytest.raises(DataError):
            Dataset.from_columns([("a", [1.0, 2.0])], target=("y", [1.0]))

    def test_arrays_are_read_only(self):
        d = Dataset.from_columns([("a", [1.0, 2.0])], target=("y", [0.0, 1.0]))
        with pytest.raises(ValueError):
            d.X[0, 0] = 9.0
        with pytest.raises(ValueError):
            d.y[0] = 9.0

    def test_take_preserves_row_ids(self):
        d = Dataset.from_columns([("a", [10.0, 20.0, 30.0])], target=("y", [0.0, 1.0, 0.0]))
        sub = d.take([2, 0])
        assert sub.column("a").tolist() == [30.0, 10.0]
        assert sub.row_ids.tolist() == [2, 0]

    def test_select_features_orders_columns(self):
        d = Dataset.from_columns([("a", [1.0]), ("b", [2.0]), ("c", [3.0])])
        sub = d.select_features(["c", "a"])
        assert sub.feature_names == ("c", "a")
        assert sub.X.tolist() == [[3.0, 1.0]]

    def test_unknown_column_is_schema_error(self):
        d = Dataset.from_columns([("a", [1.0])])
        with pytest.raises(SchemaError):
            d.column("zzz")


class TestStandardize:
    def test_symmetric_column(self):
        d = Dataset.from_columns([("a", [1.0, 2.0, 3.0])])
        out, params = standardize(d, ["a"])
        assert out.column("a").tolist() == [-1.0, 0.0, 1.0]
        assert params.means[0] == 2.0
        assert params.stds[0] == 1.0
        assert params.constant == (False,)

    def test_constant_column_flagged(self):
        d = Dataset.from_columns([("a", [5.0, 5.0, 5.0])])
        out, params = standardize(d, ["a"])
        assert out.column("a").tolist() == [0.0, 0.0, 0.0]
        assert params.constant == (True,)
        assert params.stds[0] == 1.0

    def test_two_point_column_sample_std(self):
        d = Dataset.from_columns([("a", [0.0, 10.0])])
        out, params = standardize(d, ["a"])
        assert params.stds[0] == pytest.approx(7.0711, abs=5e-5)
        assert out.column("a").tolist() == pytest.approx([-0.7071, 0.7071], abs=5e-5)

    def test_replay_matches_fit_output(self):
        rng = np.random.default_rng(3)
        d = Dataset.from_columns([("a", rng.normal(2, 5, 40)), ("b", rng.normal(size=40))])
        out, params = standardize(d, ["a", "b"])
        replay = apply_standardization(params, d)
        assert np.max(np.abs(replay.X - out.X)) < 1e-12

    def test_replay_on_held_out_value(self):
        train = Dataset.from_columns([("a", [1.0, 3.0])])  # mean 2
        _, params = standardize(train, ["a"])
        held = Dataset.from_columns([("a", [2.0 + params.stds[0] * 2])])
        out = apply_standardization(params, held)
        assert out.column("a")[0] == pytest.approx(2.0, abs=1e-12)

    def test_untouched_columns_pass_through(self):
        d = Dataset.from_columns([("a", [1.0, 2.0]), ("b", [7.0, 9.0])])
        out, _ = standardize(d, ["a"])
        assert out.column("b").tolist() == [7.0, 9.0]


class TestSplitStratified:
    def test_insurance_sized_split(self):
        d = make_binary(2697, 963, seed=1)
        train, test = split_stratified(d, 0.2, seed=11)
        assert test.n_rows == 539
        assert train.n_rows == 2697 - 539
        n_pos = int(test.y.sum())
        assert abs(n_pos - 963 * 0.2) <= 1

    def test_exact_proportions_small(self):
        d = make_binary(10, 5, seed=2)
        train, test = split_stratified(d, 0.2, seed=0)
        assert test.n_rows == 2
        assert int(test.y.sum()) == 1

    def test_same_seed_identical(self):
        d = make_binary(120, 30, seed=4)
        _, t1 = split_stratified(d, 0.25, seed=9)
        _, t2 = split_stratified(d, 0.25, seed=9)
        assert t1.row_ids.tolist() == t2.row_ids.tolist()

    def test_disjoint_and_exhaustive(self):
        d = make_binary(57, 20, seed=5)
        train, test = split_stratified(d, 0.3, seed=1)
        ids = sorted(train.row_ids.tolist() + test.row_ids.tolist())
        assert ids == list(range(57))

    def test_tiny_class_is_error(self):
        d = make_binary(20, 1, seed=6)
        with pytest.raises(StratificationError):
            split_stratified(d, 0.2, seed=0)

    def test_bad_fraction_is_config_error(self):
        d = make_binary(20, 10, seed=7)
        with pytest.raises(ConfigError):
            split_stratified(d, 1.5, seed=0)


class TestKfold:
    def test_divisible_case(self):
        d = make_binary(100, 40, seed=8)
        fa = kfold_stratified(d, 5, seed=2)
        for f in range(5):
            rows = fa.val_rows(f)
            assert rows.shape[0] == 20
            assert int(d.y[rows].sum()) == 8

    def test_remainder_case(self):
        d = make_binary(101, 41, seed=9)
        fa = kfold_stratified(d, 5, seed=2)
        pos_counts = sorted(int(d.y[fa.val_rows(f)].sum()) for f in range(5))
        assert set(pos_counts) <= {8, 9}
        assert sum(pos_counts) == 41

    def test_leave_one_out(self):
        d = make_binary(12, 5, seed=10)
        fa = kfold_stratified(d, 12, seed=0)
        sizes = [fa.val_rows(f).shape[0] for f in range(12)]
        assert sizes == [1] * 12

    def test_small_class_is_error(self):
        d = make_binary(30, 3, seed=11)
        with pytest.raises(StratificationError):
            kfold_stratified(d, 5, seed=0)

    def test_k_below_two_is_config_error(self):
        d = make_binary(30, 10, seed=12)
        with pytest.raises(ConfigError):
            kfold_stratified(d, 1, seed=0)

    def test_folds_partition_rows(self):
        d = make_binary(83, 31, seed=13)
        fa = kfold_stratified(d, 4, seed=5)
        all_rows = np.concatenate([fa.val_rows(f) for f in range(4)])
        assert sorted(all_rows.tolist()) == list(range(83))

    def test_within_one_of_proportional_share(self):
        rng = np.random.default_rng(20240818)
        for _ in range(40):
            n = int(rng.integers(20, 400))
            n_pos = int(rng.integers(5, n - 5))
            k = int(rng.integers(2, 9))
            d = make_binary(n, n_pos, seed=int(rng.integers(1 << 30)), p=1)
            if min(n_pos, n - n_pos) < k:
                continue
            fa = kfold_stratified(d, k, seed=int(rng.integers(1 << 30)))
            for f in range(k):
                rows = fa.val_rows(f)
                assert rows.shape[0] > 0
                assert abs(float(d.y[rows].sum()) - n_pos / k) <= 1.0

    def test_random_folds_balanced_sizes(self):
        fa = kfold_random(23, 4, seed=3)
        sizes = sorted(fa.val_rows(f).shape[0] for f in range(4))
        assert sizes == [5, 6, 6, 6]


SCHEMA = Schema(
    columns={
        "Age": "numeric",
        "FrequentFlyer": {"type": "binary", "yes": "Yes", "no": "No"},
        "Employment.Type": {
            "type": "categorical",
            "levels": ["Government Sector", "Private Sector/Self Employed"],
        },
        "City": {"type": "categorical", "levels": ["b", "a", "c"]},
        "Bought": {"type": "binary", "yes": "1", "no": "0"},
    },
    target="Bought",
)


def write_lines(tmp_path, lines, name="in.csv"):
    p = tmp_path / name
    p.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return p


class TestIngest:
    def header(self):
        return "Age,FrequentFlyer,Employment.Type,City,Bought"

    def test_basic_encoding(self, tmp_path):
        p = write_lines(
            tmp_path,
            [
                self.header(),
                "31,Yes,Government Sector,a,1",
                "28,No,Private Sector/Self Employed,c,0",
            ],
        )
        d = load_csv(p, SCHEMA)
        assert d.n_rows == 2
        # two-level categorical collapses to one 0/1 column under the bare name
        assert d.feature_names == ("Age", "FrequentFlyer", "Employment.Type", "City=b", "City=c")
        assert d.column("Employment.Type").tolist() == [0.0, 1.0]
        assert d.column("City=b").tolist() == [0.0, 0.0]
        assert d.column("City=c").tolist() == [0.0, 1.0]
        assert d.target_name == "Bought"
        assert d.y.tolist() == [1.0, 0.0]

    def test_header_only_is_valid_empty(self, tmp_path):
        p = write_lines(tmp_path, [self.header()])
        d = load_csv(p, SCHEMA)
        assert d.n_rows == 0
        assert d.n_features == 5

    def test_empty_file_is_data_error(self, tmp_path):
        p = tmp_path / "empty.csv"
        p.write_text("", encoding="utf-8")
        with pytest.raises(DataError):
            load_csv(p, SCHEMA)

    def test_missing_schema_column_is_schema_error(self, tmp_path):
        p = write_lines(tmp_path, ["Age,FrequentFlyer", "31,Yes"])
        with pytest.raises(SchemaError):
            load_csv(p, SCHEMA)

    def test_undeclared_column_is_schema_error(self, tmp_path):
        p = write_lines(tmp_path, [self.header() + ",Extra", "31,Yes,a,a,1,9"])
        with pytest.raises(SchemaError):
            load_csv(p, SCHEMA)

    def test_unparseable_cell_strict_names_the_row(self, tmp_path):
        p = write_lines(
            tmp_path,
            [self.header(), "31,Yes,Government Sector,a,1", "oops,Yes,Government Sector,a,1"],
        )
        with pytest.raises(ParseError) as exc:
            load_csv(p, SCHEMA)
        assert exc.value.row == 3
        assert exc.value.column == "Age"

    def test_unparseable_cell_quarantined_when_not_strict(self, tmp_path):
        p = write_lines(
            tmp_path,
            [
                self.header(),
                "31,Yes,Government Sector,a,1",
                "oops,Yes,Government Sector,a,1",
                "28,Maybe,Government Sector,a,0",
            ],
        )
        d, report = ingest_csv(p, SCHEMA, strict=False)
        assert d.n_rows == 1
        assert report.n_rows_read == 3
        assert report.n_rejected_unparseable == 2
        assert report.n_rejected_missing == 0

    def test_missing_cell_always_quarantined(self, tmp_path):
        p = write_lines(
            tmp_path,
            [self.header(), "31,Yes,Government Sector,a,1", ",Yes,Government Sector,a,1"],
        )
        d, report = ingest_csv(p, SCHEMA, strict=True)
        assert d.n_rows == 1
        assert report.n_rejected_missing == 1
        assert report.rejections[0][0] == 3

    def test_row_ids_index_kept_data_rows(self, tmp_path):
        p = write_lines(
            tmp_path,
            [self.header(), ",Yes,Government Sector,a,1", "31,No,Government Sector,b,0"],
        )
        d, _ = ingest_csv(p, SCHEMA, strict=False)
        assert d.row_ids.tolist() == [1]

    def test_roundtrip_through_write_csv(self, tmp_path):
        d = Dataset.from_columns(
            [("a", [1.5, -2.0]), ("b", [0.25, 3.0])], target=("y", [1.0, 0.0])
        )
        out = tmp_path / "out.csv"
        write_csv(d, out)
        schema = Schema(columns={"a": "numeric", "b": "numeric", "y": "numeric"}, target="y")
        back = load_csv(out, schema)
        assert back.feature_names == ("a", "b")
        assert np.array_equal(back.X, d.X)
        assert np.array_equal(back.y, d.y)

    def test_report_dataclass_defaults(self):
        r = IngestReport()
        assert r.n_rows_read == 0 and r.rejections == []
