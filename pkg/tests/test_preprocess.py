import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_matrix
from xaistab.data import Column, ColumnKind, Dataset, DomainTag
from xaistab.preprocess import (PreprocessConfig, PreprocessError, SplitError, apply_preprocessor,
                                fit_preprocessor, kfold_subjects, read_feature_matrix, smote_oversample,
                                subject_split, write_feature_matrix)
from xaistab.synth import SynthConfig, generate_synthetic


def _dataset(cols, n=None):
    n = n or len(cols[0][2])
    columns = tuple(Column(name, kind, np.array(vals, dtype=float if kind is ColumnKind.NUMERIC else object),
                           DomainTag.OTHER) for name, kind, vals in cols)
    return Dataset(columns, [f"s{i}" for i in range(n)], [0] * n, [70.0] * n, [0] * n)


N, C = ColumnKind.NUMERIC, ColumnKind.CATEGORICAL


class TestFit:
    def test_numeric_impute_and_scale(self):
        d = _dataset([("x", N, [1.0, 2.0, 3.0, math.nan])])
        p = fit_preprocessor(d)
        st_ = p.numeric["x"]
        assert st_.median == 2.0 and st_.mean == 2.0
        assert st_.std == pytest.approx(np.std([1.0, 2.0, 3.0]))
        m = apply_preprocessor(p, d)
        assert m.feature_names == ("scaler_x",)
        assert m.X[3, 0] == 0.0  # imputed median == mean

    def test_constant_column_has_unit_scale(self):
        d = _dataset([("x", N, [5.0, 5.0, 5.0])])
        m = apply_preprocessor(fit_preprocessor(d), d)
        assert np.all(m.X == 0.0)

    def test_drop_mostly_missing(self):
        d = _dataset([("keep", N, [1, 2, math.nan, 4]), ("drop", N, [1, math.nan, math.nan, math.nan])])
        p = fit_preprocessor(d)
        assert p.kept_columns == ("keep",)

    def test_one_hot_with_mode_tie_and_unseen(self):
        d = _dataset([("c", C, ["b", "a", None, "b", "a"])])
        p = fit_preprocessor(d)
        assert p.categorical["c"].mode == "a"  # tie broken lexicographically
        assert p.output_feature_names == ("ohe_c_a", "ohe_c_b")
        m = apply_preprocessor(p, d)
        np.testing.assert_array_equal(m.X[2], [1.0, 0.0])
        other = _dataset([("c", C, ["z"])])
        np.testing.assert_array_equal(apply_preprocessor(p, other).X, [[0.0, 0.0]])

    def test_frequency_encoding_above_threshold(self):
        vals = [f"v{i % 5}" for i in range(20)] + ["v0"]
        d = _dataset([("c", C, vals)])
        p = fit_preprocessor(d, PreprocessConfig(cardinality_threshold=4))
        assert p.output_feature_names == ("freq_c",)
        m = apply_preprocessor(p, d)
        assert m.X[0, 0] == 5.0 and m.X[1, 0] == 4.0

    def test_statistics_come_from_train_only(self):
        train = _dataset([("x", N, [0.0, 2.0])])
        test = _dataset([("x", N, [100.0])])
        p = fit_preprocessor(train)
        assert apply_preprocessor(p, test).X[0, 0] == pytest.approx(99.0)

    def test_missing_required_column(self):
        p = fit_preprocessor(_dataset([("x", N, [1.0, 2.0])]))
        with pytest.raises(PreprocessError, match="'x'"):
            apply_preprocessor(p, _dataset([("y", N, [1.0])]))

    def test_feature_domains_follow_sources(self):
        d = generate_synthetic(SynthConfig(n_subjects=300, seed=1))
        p = fit_preprocessor(d)
        dom = p.feature_domains()
        assert dom["scaler_MEMORY"] is DomainTag.COGNITIVE
        assert dom["ohe_MOCALANX_en"] is DomainTag.LANGUAGE
        assert "freq_SITEID" in dom
        assert "scaler_NPIQINF" not in dom


class TestSplits:
    def test_subject_split(self):
        d = generate_synthetic(SynthConfig(n_subjects=50, seed=2))
        plan = subject_split(d, 0.2, seed=4)
        assert len(plan.test_subjects) == 10
        assert not set(plan.test_subjects) & set(plan.train_subjects)
        assert set(plan.test_subjects) | set(plan.train_subjects) == set(d.subjects())
        assert subject_split(d, 0.2, seed=4) == plan

    def test_split_keeps_one_training_subject(self):
        d = _dataset([("x", N, [1.0, 2.0])])
        plan = subject_split(d, 0.99)
        assert len(plan.train_subjects) == 1

    def test_kfold_balanced_and_disjoint(self):
        subjects = [f"s{i:03d}" for i in range(23)]
        folds = kfold_subjects(subjects, 5, seed=0)
        sizes = sorted(len(v) for _, v in folds)
        assert sizes[-1] - sizes[0] <= 1
        seen = set()
        for train, val in folds:
            assert not set(train) & set(val)
            assert set(train) | set(val) == set(subjects)
            assert not seen & set(val)
            seen |= set(val)
        assert seen == set(subjects)
        with pytest.raises(SplitError):
            kfold_subjects(subjects[:3], 5)


class TestSmote:
    def _imbalanced(self, rng):
        X = np.vstack([rng.normal(size=(30, 3)), rng.normal(3.0, 1.0, size=(8, 3))])
        y = np.array([0] * 30 + [2] * 8)
        return make_matrix(X, y)

    def test_balances_and_marks_synthetic(self, rng):
        m = self._imbalanced(rng)
        out = smote_oversample(m, 5, seed=1)
        assert out.label_counts() == {0: 30, 2: 30}
        assert out.synthetic.sum() == 22
        assert not out.synthetic[:m.n_rows].any()
        assert out.subject_id[m.n_rows] == "__smote_AD_0"
        np.testing.assert_array_equal(out.X[:m.n_rows], m.X)

    def test_synthetic_rows_lie_between_minority_neighbours(self, rng):
        m = self._imbalanced(rng)
        out = smote_oversample(m, 3, seed=2)
        minority = m.X[m.y == 2]
        for row in out.X[out.synthetic]:
            ok = False
            for a in minority:
                for b in minority:
                    d = b - a
                    if not np.any(d):
                        continue
                    t = float(np.dot(row - a, d) / np.dot(d, d))
                    if -1e-12 <= t <= 1 + 1e-12 and np.allclose(a + t * d, row, atol=1e-9):
                        ok = True
            assert ok

    def test_neighbour_count_clamped(self):
        m = make_matrix([[0.0], [1.0], [5.0], [6.0], [7.0], [8.0]], [1, 1, 0, 0, 0, 0])
        out = smote_oversample(m, 5, seed=0)
        assert out.label_counts() == {0: 4, 1: 4}
        syn = out.X[out.synthetic, 0]
        assert np.all((syn >= 0.0) & (syn <= 1.0))

    def test_errors(self):
        with pytest.raises(PreprocessError):
            smote_oversample(make_matrix([[0.0], [1.0]], [0, 0]))
        with pytest.raises(PreprocessError, match="single row"):
            smote_oversample(make_matrix([[0.0], [1.0], [2.0]], [0, 0, 1]))

    @settings(max_examples=30, deadline=None)
    @given(st.integers(2, 12), st.integers(13, 30), st.integers(0, 10_000))
    def test_counts_property(self, n_min, n_maj, seed):
        rng = np.random.default_rng(seed)
        m = make_matrix(rng.normal(size=(n_min + n_maj, 2)), [1] * n_min + [0] * n_maj)
        out = smote_oversample(m, 5, seed)
        assert out.label_counts() == {0: n_maj, 1: n_maj}
        lo, hi = m.X[m.y == 1].min(axis=0), m.X[m.y == 1].max(axis=0)
        syn = out.X[out.synthetic]
        assert np.all(syn >= lo - 1e-12) and np.all(syn <= hi + 1e-12)


def test_feature_matrix_csv_round_trip(tmp_path, rng):
    m = make_matrix(rng.normal(size=(7, 2)), [0, 1, 2, 0, 1, 2, 0])
    m = smote_oversample(m, 1, seed=0)
    write_feature_matrix(m, tmp_path / "m.csv")
    back = read_feature_matrix(tmp_path / "m.csv")
    assert back.feature_names == m.feature_names
    np.testing.assert_array_equal(back.X, m.X)
    np.testing.assert_array_equal(back.y, m.y)
    np.testing.assert_array_equal(back.synthetic, m.synthetic)
    assert list(back.subject_id) == list(m.subject_id)
