import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from screenkit.features import FeatureMatrix
from screenkit.models import (ArtifactError, ForestConfig, RandomForestModel, RandomPredictorModel, load, load_file,
                              random_predict, read_header, rf_predict, rf_train, save, save_file, weighted_mse)
from screenkit.sampling import compute_weights

FULL = dict(n_estimators=1, max_depth=None, features_per_split=1.0, bootstrap=False)


def reference_tree(X, y, w, max_depth=None, min_leaf=1):
    """Plain recursive CART: weighted SSE reduction, midpoints, first-best wins.

    Gains within 1e-10 of the node's SSE are ties, as documented for the kernel.

    Returns nested tuples ``(feature, threshold, left, right)`` or a leaf value.
    """
    def sse(idx):
        ww, yy = w[idx], y[idx]
        mean = np.sum(ww * yy) / np.sum(ww)
        return np.sum(ww * (yy - mean) ** 2), mean

    def grow(idx, depth):
        parent, mean = sse(idx)
        if (max_depth is not None and depth >= max_depth) or np.ptp(y[idx]) == 0 or len(idx) < 2 * min_leaf:
            return mean
        best = None
        for f in range(X.shape[1]):
            vals = np.unique(X[idx, f])
            for a, b in zip(vals[:-1], vals[1:]):
                thr = (a + b) / 2
                left, right = idx[X[idx, f] <= thr], idx[X[idx, f] > thr]
                if len(left) < min_leaf or len(right) < min_leaf:
                    continue
                gain = parent - sse(left)[0] - sse(right)[0]
                if best is None or gain > best[0] + 1e-10 * parent:
                    best = (gain, f, thr, left, right)
        if best is None or best[0] <= 1e-10 * parent:
            return mean
        _, f, thr, left, right = best
        return (f, thr, grow(left, depth + 1), grow(right, depth + 1))

    return grow(np.arange(len(y)), 0)


def as_nested(tree, node=0):
    if tree.feature[node] < 0:
        return tree.value[node]
    return (int(tree.feature[node]), float(tree.threshold[node]),
            as_nested(tree, tree.left[node]), as_nested(tree, tree.right[node]))


def nested_equal(a, b):
    if isinstance(a, tuple) != isinstance(b, tuple):
        return False
    if not isinstance(a, tuple):
        return abs(a - b) < 1e-9
    return a[0] == b[0] and a[1] == b[1] and nested_equal(a[2], b[2]) and nested_equal(a[3], b[3])


def route(tree, row):
    node = 0
    while tree.feature[node] >= 0:
        node = tree.left[node] if row[tree.feature[node]] <= tree.threshold[node] else tree.right[node]
    return node


def random_problem(seed, n=40, p=5, levels=4):
    rng = np.random.default_rng(seed)
    X = rng.integers(0, levels, size=(n, p)).astype(np.float64)
    y = 2.0 * X[:, 0] - X[:, 1] + rng.normal(0, 0.5, n)
    return X, y


class TestWeightedMSE:
    def test_unit_weights_equal_mse(self):
        y, yhat = np.array([1.0, 2.0, 4.0]), np.array([1.5, 2.0, 3.0])
        assert weighted_mse(y, yhat, np.ones(3)) == pytest.approx(np.mean((y - yhat) ** 2))

    def test_single_term(self):
        assert weighted_mse([5.0], [4.0], [2.0]) == 2.0

    def test_perfect_fit(self):
        assert weighted_mse([1.0, 2.0], [1.0, 2.0], [3.0, 0.5]) == 0.0

    def test_errors(self):
        with pytest.raises(ValueError):
            weighted_mse([1.0], [1.0, 2.0], [1.0])
        with pytest.raises(ValueError):
            weighted_mse([1.0], [1.0], [0.0])


class TestRandomPredictor:
    def test_range_and_determinism(self):
        m = RandomPredictorModel(3.85, 9.10, seed=1)
        a = random_predict(m, 1000)
        assert a.min() >= 3.85 and a.max() <= 9.10
        assert np.array_equal(a, random_predict(m, 1000))

    def test_mean_of_million(self):
        m = RandomPredictorModel(3.85, 9.10, seed=2)
        assert random_predict(m, 1_000_000).mean() == pytest.approx((3.85 + 9.10) / 2, abs=0.01)

    def test_fit_uses_training_range(self):
        m = RandomPredictorModel.fit([4.0, 7.5, 5.0], seed=0)
        assert (m.low, m.high) == (4.0, 7.5)

    def test_invalid(self):
        with pytest.raises(ValueError):
            RandomPredictorModel(5.0, 5.0)
        with pytest.raises(ValueError):
            random_predict(RandomPredictorModel(1.0, 2.0), 0)


class TestTreeConstruction:
    def test_constant_target(self):
        X, _ = random_problem(0)
        m = rf_train(X, np.full(len(X), 5.5), config=ForestConfig(n_estimators=5), seed=0)
        assert np.all(rf_predict(m, X) == 5.5)
        assert all(t.n_nodes == 1 for t in m.trees)

    def test_separating_feature(self):
        X = np.array([[0.0], [0.2], [0.8], [1.0]])
        y = np.array([0.0, 0.0, 10.0, 10.0])
        m = rf_train(X, y, config=ForestConfig(max_depth=1, **{k: v for k, v in FULL.items() if k != "max_depth"}),
                     seed=0)
        tree = m.trees[0]
        assert tree.feature[0] == 0 and 0.2 < tree.threshold[0] < 0.8
        assert set(rf_predict(m, np.array([[-1.0], [0.1], [0.9], [2.0]])).tolist()) == {0.0, 10.0}

    def test_memorizes_training_rows(self):
        X = np.array([[0, 0, 1], [0, 1, 0], [1, 0, 0], [1, 1, 0],
                      [0, 1, 1], [1, 0, 1], [1, 1, 1], [0, 0, 0]], dtype=np.float64)
        y = np.array([4.1, 5.2, 6.3, 7.4, 3.5, 8.6, 4.7, 5.8])
        m = rf_train(X, y, config=ForestConfig(**FULL), seed=0)
        assert np.array_equal(rf_predict(m, X), y)

    @pytest.mark.parametrize("seed", range(12))
    def test_matches_reference_cart(self, seed):
        X, y = random_problem(seed, n=30, p=4)
        w = np.random.default_rng(seed + 100).uniform(0.5, 2.0, len(y))
        for depth in (1, 3, None):
            cfg = ForestConfig(**{**FULL, "max_depth": depth})
            m = rf_train(X, y, w, cfg, seed=seed)
            assert nested_equal(as_nested(m.trees[0]), reference_tree(X, y, w, depth))

    @pytest.mark.parametrize("seed", range(8))
    def test_matches_reference_cart_continuous(self, seed):
        rng = np.random.default_rng(seed)
        X, y = rng.normal(size=(25, 3)), rng.normal(size=25)
        m = rf_train(X, y, config=ForestConfig(**FULL), seed=seed)
        assert nested_equal(as_nested(m.trees[0]), reference_tree(X, y, np.ones(25)))

    def test_min_samples_leaf(self):
        X, y = random_problem(3, n=60)
        m = rf_train(X, y, config=ForestConfig(n_estimators=3, min_samples_leaf=7, bootstrap=False), seed=1)
        for tree in m.trees:
            counts = np.bincount([route(tree, row) for row in X], minlength=tree.n_nodes)
            leaves = tree.feature < 0
            assert counts[leaves].min() >= 7

    def test_depth_bound_and_count(self):
        X, y = random_problem(5, n=200, p=8, levels=10)
        m = rf_train(X, y, config=ForestConfig(n_estimators=7, max_depth=3), seed=2)
        assert len(m.trees) == 7
        assert max(t.depth() for t in m.trees) <= 3

    def test_leaf_is_weighted_mean(self):
        X, y = random_problem(7, n=80)
        labels = y >= np.quantile(y, 0.9)
        w = compute_weights(labels)
        m = rf_train(X, y, w, ForestConfig(n_estimators=2, max_depth=4, bootstrap=False), seed=3)
        for tree in m.trees:
            leaf_of = np.array([route(tree, row) for row in X])
            for leaf in np.unique(leaf_of):
                members = leaf_of == leaf
                assert tree.value[leaf] == pytest.approx(np.sum(w[members] * y[members]) / np.sum(w[members]),
                                                         rel=1e-12)

    @pytest.mark.parametrize("k", [2.0, 0.5, 3.7, 1e-3, 250.0])
    def test_weight_scaling_keeps_structure(self, k):
        X, y = random_problem(11, n=50, p=6)
        w = np.random.default_rng(1).uniform(0.5, 3.0, 50)
        cfg = ForestConfig(n_estimators=10, max_depth=6)
        a = rf_train(X, y, w, cfg, seed=4)
        b = rf_train(X, y, k * w, cfg, seed=4)
        assert [t.structure() for t in a.trees] == [t.structure() for t in b.trees]

    def test_weights_of_two_give_identical_forest(self):
        X, y = random_problem(12, n=50)
        cfg = ForestConfig(n_estimators=10)
        a = rf_train(X, y, np.ones(50), cfg, seed=8)
        b = rf_train(X, y, np.full(50, 2.0), cfg, seed=8)
        assert [t.structure() for t in a.trees] == [t.structure() for t in b.trees]
        assert np.allclose(rf_predict(a, X), rf_predict(b, X), rtol=0, atol=1e-12)

    def test_absent_weights_are_ones(self):
        X, y = random_problem(2)
        cfg = ForestConfig(n_estimators=4)
        assert save(rf_train(X, y, None, cfg, seed=1)).split(b"training_hash")[1:] == \
            save(rf_train(X, y, np.ones(len(y)), cfg, seed=1)).split(b"training_hash")[1:]

    @given(st.integers(0, 10_000))
    @settings(max_examples=25, deadline=None)
    def test_predictions_within_target_range(self, seed):
        X, y = random_problem(seed, n=30, p=3)
        m = rf_train(X, y, config=ForestConfig(n_estimators=5), seed=seed)
        probe = np.random.default_rng(seed).uniform(-5, 10, size=(50, 3))
        p = rf_predict(m, probe)
        assert p.min() >= y.min() - 1e-12 and p.max() <= y.max() + 1e-12

    def test_uint8_and_float_features_agree(self):
        rng = np.random.default_rng(0)
        X = (rng.random((120, 30)) < 0.2).astype(np.uint8)
        y = 4.5 + 2.0 * X[:, 3] + rng.normal(0, 0.1, 120)
        cfg = ForestConfig(n_estimators=5)
        a = rf_train(X, y, config=cfg, seed=1)
        b = rf_train(X.astype(np.float64), y, config=cfg, seed=1)
        assert [t.structure() for t in a.trees] == [t.structure() for t in b.trees]

    def test_errors(self):
        with pytest.raises(ValueError):
            rf_train(np.zeros((0, 3)), np.zeros(0))
        with pytest.raises(ValueError):
            rf_train(np.array([[np.nan], [1.0]]), np.array([1.0, 2.0]))
        with pytest.raises(ValueError):
            rf_train(np.ones((3, 2)), np.ones(2))
        with pytest.raises(ValueError):
            ForestConfig(features_per_split=0.0)


class TestDeterminism:
    def test_seed_determines_bytes(self):
        X, y = random_problem(3, n=100, p=10)
        cfg = ForestConfig(n_estimators=8)
        assert save(rf_train(X, y, config=cfg, seed=5)) == save(rf_train(X, y, config=cfg, seed=5))
        assert save(rf_train(X, y, config=cfg, seed=5)) != save(rf_train(X, y, config=cfg, seed=6))

    def test_parallel_equals_sequential(self):
        X, y = random_problem(4, n=100, p=10)
        cfg = ForestConfig(n_estimators=8)
        assert save(rf_train(X, y, config=cfg, seed=5, n_jobs=1)) == save(rf_train(X, y, config=cfg, seed=5, n_jobs=3))


class TestSchema:
    def test_feature_matrix_schema_checked(self):
        X, y = random_problem(1, p=3)
        fm = FeatureMatrix(X, ("a", "b", "c"))
        m = rf_train(fm, y, config=ForestConfig(n_estimators=2), seed=0)
        assert m.feature_schema == ("a", "b", "c")
        rf_predict(m, fm)
        with pytest.raises(ValueError, match="schema"):
            rf_predict(m, FeatureMatrix(X, ("a", "c", "b")))
        with pytest.raises(ValueError):
            rf_predict(m, X[:, :2])

    def test_single_tree_forest_is_tree_routing(self):
        X, y = random_problem(9)
        m = rf_train(X, y, config=ForestConfig(n_estimators=1), seed=0)
        tree = m.trees[0]
        assert np.array_equal(rf_predict(m, X), np.array([tree.value[route(tree, r)] for r in X]))


class TestArtifact:
    def fitted(self):
        X, y = random_problem(6, n=60)
        return X, rf_train(X, y, config=ForestConfig(n_estimators=6, max_depth=5), seed=13)

    def test_round_trip(self, tmp_path):
        X, m = self.fitted()
        save_file(m, tmp_path / "m.bin")
        back = load_file(tmp_path / "m.bin")
        assert isinstance(back, RandomForestModel)
        assert np.array_equal(rf_predict(back, X), rf_predict(m, X))
        assert save(back) == save(m)

    def test_header_records_config_and_seed(self):
        _, m = self.fitted()
        header = read_header(save(m))
        assert header["seed"] == 13 and header["config"]["n_estimators"] == 6
        assert header["config"]["features_per_split"] == pytest.approx(1 / 3)
        assert len(header["training_hash"]) == 64

    def test_truncated(self):
        _, m = self.fitted()
        data = save(m)
        with pytest.raises(ArtifactError, match="checksum|truncated"):
            load(data[:-10])

    def test_corrupted_byte(self):
        _, m = self.fitted()
        data = bytearray(save(m))
        data[len(data) // 2] ^= 0xFF
        with pytest.raises(ArtifactError, match="checksum"):
            load(bytes(data))

    def test_version_mismatch(self):
        _, m = self.fitted()
        data = bytearray(save(m))
        data[8] = 99
        with pytest.raises(ArtifactError, match="version"):
            load(bytes(data))

    def test_not_an_artifact(self):
        with pytest.raises(ArtifactError):
            load(b"hello world" * 10)

    def test_random_predictor_round_trip(self):
        m = RandomPredictorModel(3.9, 8.8, seed=4)
        back = load(save(m))
        assert back == m
        assert np.array_equal(random_predict(back, 10), random_predict(m, 10))
