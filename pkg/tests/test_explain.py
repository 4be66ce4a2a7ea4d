import numpy as np
import pytest

from qcaan.data import DatasetMetadata
from qcaan.explain import (ExplainError, build_diff_table, ceteris_paribus,
                           fit_gbt, fit_regression_tree, permutation_importance,
                           tree_predict)


def make_metadata(name, base=1.0):
    return DatasetMetadata(
        name=name, f=20, n_samples=500, n_neg=450, n_pos=50, ratio=9.0,
        dn=(0.1 * base, 0.5 * base, 1.0 * base),
        dp=(0.2 * base, 0.6 * base, 1.1 * base),
        dnp=(0.15 * base, 0.55 * base, 1.2 * base))


def result_row(dataset, strategy, accuracy, precision=0.5, recall=0.5, seed=0):
    return {"dataset": dataset, "strategy": strategy, "seed": seed, "status": "ok",
            "accuracy": accuracy, "precision": precision, "recall": recall,
            "auc": 0.5}


class TestDiffTable:
    def test_identical_values_give_zero_diff(self):
        rows = [result_row("a", "smote", 0.9), result_row("a", "qcaan", 0.9)]
        table = build_diff_table(rows, {"a": make_metadata("a")})
        assert table.diffs["accuracy"][0] == 0.0

    def test_diff_arithmetic(self):
        rows = [result_row("a", "smote", 0.90), result_row("a", "qcaan", 0.95)]
        table = build_diff_table(rows, {"a": make_metadata("a")})
        assert table.diffs["accuracy"][0] == pytest.approx(0.05)

    def test_seeds_averaged(self):
        rows = [result_row("a", "smote", 0.8, seed=0),
                result_row("a", "smote", 0.9, seed=1),
                result_row("a", "qcaan", 0.95, seed=0),
                result_row("a", "qcaan", 0.85, seed=1)]
        table = build_diff_table(rows, {"a": make_metadata("a")})
        assert table.diffs["accuracy"][0] == pytest.approx(0.9 - 0.85)

    def test_join_cardinality(self):
        rows = []
        metadata = {}
        for i, name in enumerate(["a", "b", "c"]):
            rows += [result_row(name, "smote", 0.8), result_row(name, "qcaan", 0.82)]
            metadata[name] = make_metadata(name, base=1.0 + i)
        rows.append(result_row("orphan", "smote", 0.5))  # no qcaan cell
        metadata["orphan"] = make_metadata("orphan")
        with pytest.raises(ExplainError, match="orphan"):
            build_diff_table(rows, metadata)
        table = build_diff_table([r for r in rows if r["dataset"] != "orphan"],
                                 metadata)
        assert len(table.dataset_names) == 3
        assert table.features.shape == (3, len(table.feature_names))

    def test_error_rows_skipped(self):
        rows = [result_row("a", "smote", 0.9), result_row("a", "qcaan", 0.95),
                {**result_row("a", "qcaan", 0.1, seed=9), "status": "error"}]
        table = build_diff_table(rows, {"a": make_metadata("a")})
        assert table.diffs["accuracy"][0] == pytest.approx(0.05)


class TestRegressionTree:
    def test_stump_recovers_step_function(self):
        x = np.linspace(0, 1, 50)[:, None]
        y = (x[:, 0] > 0.5).astype(float) * 2.0
        tree = fit_regression_tree(x, y, max_depth=1)
        assert not tree.is_leaf
        assert tree.threshold == pytest.approx(0.5, abs=0.02)
        pred = tree_predict(tree, x)
        assert np.mean((pred - y) ** 2) < 1e-12

    def test_pure_node_is_leaf(self):
        tree = fit_regression_tree(np.random.default_rng(0).random((10, 2)),
                                   np.full(10, 3.0))
        assert tree.is_leaf and tree.value == 3.0

    def test_depth_limit(self):
        rng = np.random.default_rng(1)
        x = rng.random((64, 1))
        y = rng.random(64)
        tree = fit_regression_tree(x, y, max_depth=2)

        def depth(node):
            return 0 if node.is_leaf else 1 + max(depth(node.left), depth(node.right))

        assert depth(tree) <= 2


def independent_tree_fit(X, y, max_depth):
    """Oracle: a from-scratch recursive partitioner, separately written."""
    def best(Xn, yn):
        node_sse = float(((yn - yn.mean()) ** 2).sum())
        winner = None
        for j in range(Xn.shape[1]):
            u = np.unique(Xn[:, j])
            for a, b in zip(u, u[1:]):
                t = (a + b) / 2
                left = yn[Xn[:, j] <= t]
                right = yn[Xn[:, j] > t]
                sse = float(((left - left.mean()) ** 2).sum()
                            + ((right - right.mean()) ** 2).sum())
                if sse < node_sse - 1e-15:
                    node_sse = sse
                    winner = (j, t)
        return winner

    def grow(Xn, yn, d):
        if d == max_depth or np.all(yn == yn[0]):
            return ("leaf", float(yn.mean()))
        w = best(Xn, yn)
        if w is None:
            return ("leaf", float(yn.mean()))
        j, t = w
        mask = Xn[:, j] <= t
        return ("split", j, t, grow(Xn[mask], yn[mask], d + 1),
                grow(Xn[~mask], yn[~mask], d + 1))

    def predict(node, row):
        while node[0] == "split":
            node = node[3] if row[node[1]] <= node[2] else node[4]
        return node[1]

    tree = grow(X, y, 0)
    return np.array([predict(tree, row) for row in X])


class TestGbt:
    def test_zero_rounds_predicts_mean(self):
        rng = np.random.default_rng(2)
        x = rng.random((20, 3))
        y = rng.random(20)
        model = fit_gbt(x, y, rounds=0)
        np.testing.assert_allclose(model.predict(x), y.mean(), atol=1e-12)

    def test_stump_boosting_fits_step(self):
        x = np.linspace(0, 1, 50)[:, None]
        y = (x[:, 0] > 0.5).astype(float)
        model = fit_gbt(x, y, rounds=50, max_depth=1)
        assert model.train_mse_trace[-1] < 1e-3

    def test_training_mse_non_increasing(self):
        rng = np.random.default_rng(3)
        x = rng.random((30, 4))
        y = rng.random(30)
        with pytest.warns(RuntimeWarning):
            # full-depth boosting on 30 rows memorizes, which warns
            model = fit_gbt(x, y, rounds=200, max_depth=3)
        trace = model.train_mse_trace
        assert all(b <= a + 1e-15 for a, b in zip(trace, trace[1:]))

    def test_single_round_unit_rate_equals_plain_tree(self):
        rng = np.random.default_rng(4)
        for depth in (1, 2, 3):
            x = rng.random((60, 3))
            y = rng.random(60)
            model = fit_gbt(x, y, rounds=1, learning_rate=1.0, max_depth=depth)
            oracle = independent_tree_fit(x, y, depth)
            np.testing.assert_allclose(model.predict(x), oracle, atol=1e-9)

    def test_constant_targets(self):
        x = np.random.default_rng(5).random((10, 2))
        model = fit_gbt(x, np.full(10, 1.5), rounds=10)
        np.testing.assert_allclose(model.predict(x), 1.5, atol=1e-12)

    def test_two_row_minimum(self):
        with pytest.raises(ExplainError):
            fit_gbt(np.ones((1, 2)), np.ones(1))


class TestPermutationImportance:
    def test_unused_feature_exactly_zero(self):
        rng = np.random.default_rng(6)
        x = rng.random((40, 3))
        y = (x[:, 0] > 0.5).astype(float)  # only feature 0 matters
        model = fit_gbt(x, y, rounds=20, max_depth=1)
        used = {node for tree in model.trees if not tree.is_leaf
                for node in [tree.feature]}
        importances = permutation_importance(model, x, y, repeats=5, seed=0)
        for j in range(3):
            if j not in used and all(
                    j not in _features_used(t) for t in model.trees):
                assert importances[j] == 0.0

    def test_relevant_feature_beats_noise(self):
        wins = 0
        for seed in range(20):
            rng = np.random.default_rng(seed)
            x = rng.random((60, 2))
            y = 3.0 * x[:, 0] + 0.05 * rng.normal(size=60)
            model = fit_gbt(x, y, rounds=40, max_depth=2)
            imp = permutation_importance(model, x, y, repeats=10, seed=seed)
            wins += int(imp[0] > imp[1])
        assert wins >= 19

    def test_row_order_invariant(self):
        rng = np.random.default_rng(7)
        x = rng.random((30, 3))
        y = x[:, 1] * 2.0
        model = fit_gbt(x, y, rounds=20, max_depth=2)
        base = permutation_importance(model, x, y, repeats=8, seed=1)
        perm = rng.permutation(30)
        again = permutation_importance(model, x[perm], y[perm], repeats=8, seed=1)
        np.testing.assert_allclose(base, again, atol=1e-10)


def _features_used(tree):
    out = set()

    def walk(node):
        if node is None or node.is_leaf:
            return
        out.add(node.feature)
        walk(node.left)
        walk(node.right)

    walk(tree)
    return out


class TestCeterisParibus:
    def test_constant_model_flat_profile(self):
        rng = np.random.default_rng(8)
        x = rng.random((15, 2))
        model = fit_gbt(x, np.full(15, 2.5), rounds=5)
        profile = ceteris_paribus(model, x, x[0], feature=0, grid_size=20)
        np.testing.assert_allclose(profile.predictions, 2.5, atol=1e-12)

    def test_stump_profile_steps_at_threshold(self):
        x = np.linspace(0, 1, 40)[:, None]
        y = (x[:, 0] > 0.5).astype(float)
        model = fit_gbt(x, y, rounds=1, learning_rate=1.0, max_depth=1)
        profile = ceteris_paribus(model, x, x[0], feature=0, grid_size=101)
        jumps = np.flatnonzero(np.diff(profile.predictions) != 0)
        assert len(jumps) == 1
        thr = model.thresholds_for_feature(0)[0]
        assert profile.grid[jumps[0]] <= thr <= profile.grid[jumps[0] + 1]

    def test_profile_consistent_at_anchor(self):
        rng = np.random.default_rng(9)
        x = rng.random((30, 3))
        y = x[:, 0] + x[:, 2]
        model = fit_gbt(x, y, rounds=30, max_depth=2)
        anchor = x[4]
        profile = ceteris_paribus(model, x, anchor, feature=2, grid_size=50)
        at_anchor = model.predict(anchor[None, :])[0]
        nearest = np.argmin(np.abs(profile.grid - anchor[2]))
        sweep_point = anchor.copy()
        sweep_point[2] = profile.grid[nearest]
        assert profile.predictions[nearest] == model.predict(sweep_point[None, :])[0]
        # and the exact anchor value is reproduced when placed on the grid
        exact = ceteris_paribus(model, np.vstack([x, anchor[None, :]]), anchor,
                                feature=2, grid_size=50)
        assert at_anchor == model.predict(anchor[None, :])[0]

    def test_breakpoints_only_at_own_thresholds(self):
        rng = np.random.default_rng(10)
        x = rng.random((50, 3))
        y = 2 * x[:, 0] + np.sin(5 * x[:, 1])
        model = fit_gbt(x, y, rounds=30, max_depth=2)
        profile = ceteris_paribus(model, x, np.median(x, axis=0), feature=1,
                                  grid_size=400)
        thresholds = model.thresholds_for_feature(1)
        jumps = np.flatnonzero(np.diff(profile.predictions) != 0)
        for j in jumps:
            lo, hi = profile.grid[j], profile.grid[j + 1]
            assert any(lo <= t <= hi for t in thresholds)

    def test_unknown_feature(self):
        x = np.random.default_rng(11).random((10, 2))
        model = fit_gbt(x, x[:, 0], rounds=2)
        with pytest.raises(ExplainError):
            ceteris_paribus(model, x, x[0], feature=5)
