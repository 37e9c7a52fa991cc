import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from screenkit.sampling import (SPLITS, WeightedTrainingSet, compute_weights, largest_remainder,
                                oversample_to_balance, read_manifest, stratified_split, write_manifest)


def labels_with(n, n_active, seed=0):
    lab = np.zeros(n, dtype=bool)
    lab[np.random.default_rng(seed).choice(n, n_active, replace=False)] = True
    return lab


class TestLargestRemainder:
    def test_hand_example(self):
        assert largest_remainder(21, (0.7, 0.15, 0.15)) == [15, 3, 3]
        assert largest_remainder(979, (0.7, 0.15, 0.15)) == [685, 147, 147]

    def test_ties_go_to_earlier_split(self):
        assert largest_remainder(1, (0.5, 0.5)) == [1, 0]

    @given(st.integers(0, 5000), st.floats(0.05, 0.9), st.floats(0.05, 0.9))
    def test_sums_and_stays_within_one(self, n, a, b):
        total = a + b + 1.0
        fr = (a / total, b / total, 1.0 / total)
        sizes = largest_remainder(n, fr)
        assert sum(sizes) == n
        assert all(abs(s - n * f) < 1 for s, f in zip(sizes, fr))


class TestStratifiedSplit:
    def test_hand_example(self):
        lab = labels_with(1000, 21)
        man = stratified_split(lab, seed=1)
        for split, (size, actives) in zip(SPLITS, [(700, 15), (150, 3), (150, 3)]):
            idx = man.indices(split)
            assert idx.size == size and lab[idx].sum() == actives

    def test_single_class_plain_split(self):
        man = stratified_split(np.zeros(100, dtype=bool), seed=3)
        assert [man.indices(s).size for s in SPLITS] == [70, 15, 15]

    def test_deterministic(self, tmp_path):
        lab = labels_with(500, 12)
        write_manifest(stratified_split(lab, seed=9), tmp_path / "a.csv")
        write_manifest(stratified_split(lab, seed=9), tmp_path / "b.csv")
        assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
        assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()

    def test_seed_changes_assignment(self):
        lab = labels_with(200, 10)
        assert stratified_split(lab, seed=1).assignment != stratified_split(lab, seed=2).assignment

    @pytest.mark.parametrize("fractions", [(0.7, 0.2, 0.2), (0.5, 0.5), (1.1, -0.05, -0.05)])
    def test_bad_fractions(self, fractions):
        with pytest.raises(ValueError):
            stratified_split(labels_with(10, 2), fractions, seed=0)

    def test_empty(self):
        with pytest.raises(ValueError):
            stratified_split([], seed=0)

    @given(st.integers(1, 400), st.floats(0.0, 1.0), st.integers(0, 2**63))
    @settings(max_examples=80, deadline=None)
    def test_complete_and_stratified(self, n, p, seed):
        lab = labels_with(n, int(round(p * n)), seed % 1000)
        man = stratified_split(lab, seed=seed)
        parts = [man.indices(s) for s in SPLITS]
        assert sorted(np.concatenate(parts).tolist()) == list(range(n))
        for cls in (False, True):
            n_cls = int((lab == cls).sum())
            for idx, f in zip(parts, (0.7, 0.15, 0.15)):
                assert abs(int((lab[idx] == cls).sum()) - f * n_cls) < 1


class TestOversampling:
    def test_hand_example(self):
        lab = np.array([False] * 98 + [True] * 2)
        out = oversample_to_balance(np.arange(100), lab, seed=5)
        assert out.size == 196
        assert lab[out].sum() == 98
        assert sorted(out[~lab[out]].tolist()) == list(range(98))

    @pytest.mark.parametrize("seed", range(20))
    def test_every_minority_index_present(self, seed):
        lab = np.array([False] * 98 + [True] * 2)
        out = oversample_to_balance(np.arange(100), lab, seed=seed)
        assert {98, 99} <= set(out.tolist())

    def test_balanced_input_is_permutation(self):
        lab = np.array([True, False] * 10)
        out = oversample_to_balance(np.arange(20), lab, seed=1)
        assert sorted(out.tolist()) == list(range(20))

    def test_only_train_indices_used(self):
        lab = labels_with(100, 10)
        train = np.arange(0, 100, 2)
        if lab[train].all() or not lab[train].any():
            pytest.skip("degenerate draw")
        out = oversample_to_balance(train, lab, seed=2)
        assert set(out.tolist()) <= set(train.tolist())

    def test_single_class_rejected(self):
        with pytest.raises(ValueError):
            oversample_to_balance(np.arange(5), np.zeros(5, dtype=bool), seed=0)


class TestWeights:
    def test_balanced(self):
        assert np.all(compute_weights([True] * 50 + [False] * 50) == 1.0)

    def test_small_hand_example(self):
        w = compute_weights([True, True] + [False] * 8)
        assert w[0] == 2.5 and w[5] == 0.625

    def test_reference_prevalence(self):
        lab = np.zeros(177092, dtype=bool)
        lab[:3800] = True
        w = compute_weights(lab)
        assert w[0] == pytest.approx(23.30, abs=0.01) and w[-1] == pytest.approx(0.511, abs=0.01)

    def test_single_class(self):
        with pytest.raises(ValueError):
            compute_weights([True, True])

    @given(st.lists(st.booleans(), min_size=2, max_size=500))
    def test_balance_identity(self, lab):
        lab = np.array(lab)
        if lab.all() or not lab.any():
            return
        w = compute_weights(lab)
        assert abs(w[lab].sum() - lab.size / 2) < 1e-9
        assert abs(w[~lab].sum() - lab.size / 2) < 1e-9
        assert np.all(w > 0)


class TestManifestIO:
    def test_round_trip_with_weights(self, tmp_path):
        lab = labels_with(60, 6)
        man = stratified_split(lab, seed=4)
        wts = WeightedTrainingSet.from_manifest(man, lab)
        write_manifest(man, tmp_path / "m.csv", wts)
        back, weights = read_manifest(tmp_path / "m.csv")
        assert back == man
        assert set(weights) == set(man.indices("train").tolist())
        assert weights == dict(zip(wts.indices.tolist(), wts.weights.tolist()))

    def test_val_test_unweighted(self, tmp_path):
        lab = labels_with(60, 6)
        man = stratified_split(lab, seed=4)
        write_manifest(man, tmp_path / "m.csv", WeightedTrainingSet.from_manifest(man, lab))
        rows = (tmp_path / "m.csv").read_text().splitlines()[1:]
        for row in rows:
            _, split, weight = row.split(",")
            assert (weight == "") == (split != "train")
