import numpy as np
import pytest

from rexfuse.dataset import RatingTriples, build_dataset
from rexfuse.evaluate import (
    EvalConfig,
    EvalReport,
    coverage,
    evaluate_model,
    precision_recall,
    recommend_for_user,
    render_table,
    rmse,
    sweep_alpha,
    topk,
)
from rexfuse.hybrid import train_hybrid
from rexfuse.mf import FactorModel, TrainConfig, loss_mse, train_mf
from rexfuse.semantic import ItemEmbeddingTable

from conftest import random_interactions
from oracles import (
    coverage_bruteforce,
    precision_recall_bruteforce,
    rmse_naive,
    topk_bruteforce,
)


def single_user_model(item_scores):
    """k=1 model whose scores for user 0 are exactly item_scores."""
    return FactorModel(
        np.array([[1.0]]), np.array([[s] for s in item_scores], dtype=float)
    )


# ---------------------------------------------------------------- topk

def test_topk_orders_by_score():
    model = single_user_model([0.1, 0.9, 0.5])
    assert topk(model, 0, 2) == [1, 2]


def test_topk_tie_breaks_to_lower_index():
    model = single_user_model([0.7, 0.7, 0.1])
    assert topk(model, 0, 2) == [0, 1]


def test_topk_honors_exclusions_and_short_pools():
    model = single_user_model([0.4, 0.3, 0.2, 0.1])
    assert topk(model, 0, 3, exclude={0, 2}) == [1, 3]
    assert topk(model, 0, 10) == [0, 1, 2, 3]
    assert topk(model, 0, 2, exclude={0, 1, 2, 3}) == []


def test_topk_rejects_bad_k():
    with pytest.raises(ValueError):
        topk(single_user_model([1.0]), 0, 0)


def test_topk_matches_full_sort_oracle():
    rng = np.random.default_rng(6)
    scores = rng.normal(size=50)
    scores[7] = scores[31]  # plant a tie
    model = single_user_model(scores)
    exclude = set(rng.choice(50, size=8, replace=False).tolist())
    for k in (1, 5, 20, 60):
        expected = topk_bruteforce(lambda i: scores[i], 50, k, exclude)
        assert topk(model, 0, k, exclude=exclude) == expected


# ---------------------------------------------------------------- metrics

def triples(rows):
    return RatingTriples.from_rows(rows)


def test_precision_recall_hand_case():
    # relevant = {0, 1}; recommended = [0, 5, 6]
    test = triples([(0, 0, 5.0), (0, 1, 4.0), (0, 2, 1.0)])
    precision, recall = precision_recall({0: [0, 5, 6]}, test, threshold=4.0)
    assert precision == pytest.approx(1 / 3)
    assert recall == pytest.approx(1 / 2)


def test_precision_recall_perfect():
    test = triples([(0, 0, 5.0), (0, 1, 4.5)])
    precision, recall = precision_recall({0: [0, 1]}, test, threshold=4.0)
    assert precision == 1.0 and recall == 1.0


def test_precision_recall_requires_a_relevant_user():
    test = triples([(0, 0, 1.0)])
    with pytest.raises(ValueError, match="no user"):
        precision_recall({0: [0]}, test, threshold=4.0)


def test_metrics_match_bruteforce_battery():
    rng = np.random.default_rng(7)
    for _ in range(50):
        n_users = int(rng.integers(1, 7))
        n_items = int(rng.integers(2, 11))
        k = int(rng.integers(1, 5))
        test_rows = [
            (u, int(rng.integers(n_items)), float(rng.integers(1, 6)))
            for u in range(n_users)
            for _ in range(rng.integers(1, 5))
        ]
        test = triples(test_rows)
        recs = {
            u: list(rng.choice(n_items, size=min(k, n_items), replace=False))
            for u in range(n_users)
        }
        relevant = {}
        for u, i, r in test_rows:
            if r >= 4.0:
                relevant.setdefault(u, set()).add(i)
        if not relevant:
            continue
        expected = precision_recall_bruteforce(recs, relevant)
        assert precision_recall(recs, test, 4.0) == expected
        assert coverage(recs, n_items) == coverage_bruteforce(recs, n_items)


def test_coverage_hand_cases():
    recs = {u: list(range(10)) for u in range(5)}
    assert coverage(recs, 100) == 0.10
    assert coverage({0: [0, 1], 1: [2]}, 3) == 1.0
    with pytest.raises(ValueError):
        coverage(recs, 0)


def test_rmse_hand_cases():
    model = single_user_model([2.0])
    assert rmse(model, triples([(0, 0, 2.0)])) == 0.0
    assert rmse(model, triples([(0, 0, 4.0)])) == 2.0
    with pytest.raises(ValueError):
        rmse(model, RatingTriples.empty())


def test_rmse_matches_naive_and_squares_to_mse():
    rng = np.random.default_rng(8)
    scores = rng.normal(size=20)
    model = single_user_model(scores)
    rows = [(0, int(i), float(rng.normal())) for i in rng.integers(0, 20, size=40)]
    test = triples(rows)
    predictions = [float(scores[i]) for _, i, _ in rows]
    actuals = [y for _, _, y in rows]
    got = rmse(model, test)
    expected = rmse_naive(predictions, actuals)
    assert abs(got - expected) <= 1e-12 * max(1.0, expected)
    mse = loss_mse(list(zip(predictions, actuals)))
    assert abs(got**2 - mse) <= 1e-12 * max(1.0, mse)


# ---------------------------------------------------------------- pipeline

def trained_small(seed=3):
    rng = np.random.default_rng(seed)
    ds = build_dataset(random_interactions(rng, 300, n_users=20, n_items=25), split_seed=9)
    model, _ = train_mf(ds, TrainConfig(n_factors=4, epochs=5, seed=1))
    return ds, model


def test_evaluate_model_report_is_sane():
    ds, model = trained_small()
    report = evaluate_model(model, ds, EvalConfig(top_k=5))
    for value in (report.precision, report.recall, report.coverage):
        assert 0.0 <= value <= 1.0
    assert np.isfinite(report.rmse)
    assert report.n_users_evaluated >= 1
    assert report.alpha is None


def test_evaluate_model_excludes_train_items():
    ds, model = trained_small()
    config = EvalConfig(top_k=5, exclude_train=True)
    train_items = {}
    for u, i in zip(ds.train.users.tolist(), ds.train.items.tolist()):
        train_items.setdefault(u, set()).add(i)
    relevant_users = {
        u for u, r in zip(ds.test.users.tolist(), ds.test.ratings.tolist()) if r >= 4.0
    }
    for u in relevant_users:
        rec = topk(model, u, config.top_k, exclude=train_items.get(u, ()))
        assert not (set(rec) & train_items.get(u, set()))


def test_evaluate_model_worker_count_does_not_change_result():
    ds, model = trained_small()
    serial = evaluate_model(model, ds, EvalConfig(top_k=5, workers=1))
    threaded = evaluate_model(model, ds, EvalConfig(top_k=5, workers=4))
    assert serial == threaded


def test_evaluate_model_requires_relevant_users():
    ds, model = trained_small()
    with pytest.raises(ValueError, match="no user"):
        evaluate_model(model, ds, EvalConfig(relevance_threshold=99.0))


# ---------------------------------------------------------------- sweep

def sweep_fixture():
    rng = np.random.default_rng(15)
    ds = build_dataset(random_interactions(rng, 300, n_users=20, n_items=25), split_seed=4)
    table = ItemEmbeddingTable(
        dim=6,
        vectors={i: np.random.default_rng(60 + i).normal(size=6) for i in range(ds.n_items)},
    )
    return ds, table


def test_sweep_alpha_orders_reports_by_grid():
    ds, table = sweep_fixture()
    cfg = TrainConfig(n_factors=3, epochs=3, seed=5)
    reports = sweep_alpha(ds, table, cfg, [0.3, 0.5, 0.7], EvalConfig(top_k=5))
    assert [r.alpha for r in reports] == [0.3, 0.5, 0.7]


def test_sweep_alpha_zero_equals_pure_mf_evaluation():
    ds, table = sweep_fixture()
    cfg = TrainConfig(n_factors=3, epochs=3, seed=5)
    (report,) = sweep_alpha(ds, table, cfg, [0.0], EvalConfig(top_k=5))
    mf_model, _ = train_mf(ds, cfg)
    mf_report = evaluate_model(mf_model, ds, EvalConfig(top_k=5))
    assert report.precision == mf_report.precision
    assert report.recall == mf_report.recall
    assert report.coverage == mf_report.coverage
    assert report.rmse == mf_report.rmse


def test_sweep_alpha_repeated_value_is_deterministic():
    ds, table = sweep_fixture()
    cfg = TrainConfig(n_factors=3, epochs=3, seed=5)
    first, second = sweep_alpha(ds, table, cfg, [0.5, 0.5], EvalConfig(top_k=5))
    assert first == second


def test_sweep_alpha_empty_grid_rejected():
    ds, table = sweep_fixture()
    with pytest.raises(ValueError):
        sweep_alpha(ds, table, TrainConfig(epochs=1), [])


# ---------------------------------------------------------------- recommend

def test_recommend_hides_cold_items_by_default():
    ds, table = sweep_fixture()
    model, _ = train_hybrid(ds, table, TrainConfig(n_factors=3, epochs=3, seed=5), alpha=0.5)
    counts = ds.item_train_counts()
    rows = recommend_for_user(model, 0, ds.n_items, counts, include_cold=False)
    recommended = {item for item, _, _ in rows}
    cold = set(np.flatnonzero(counts == 0).tolist())
    assert not (recommended & cold)
    scores = [score for _, score, _ in rows]
    assert scores == sorted(scores, reverse=True)
    assert all(path == "cf+semantic" for _, _, path in rows)


def test_recommend_include_cold_uses_content_path():
    ds, table = sweep_fixture()
    model, _ = train_hybrid(ds, table, TrainConfig(n_factors=3, epochs=3, seed=5), alpha=0.5)
    counts = ds.item_train_counts()
    if not (counts == 0).any():
        counts = counts.copy()
        counts[3] = 0  # force one cold item
    rows = recommend_for_user(model, 0, ds.n_items, counts, include_cold=True)
    paths = {item: path for item, _, path in rows}
    for item in np.flatnonzero(counts == 0).tolist():
        assert paths[item] == "cold-start"


def test_recommend_mf_model_labels_cf():
    ds, _ = sweep_fixture()
    model, _ = train_mf(ds, TrainConfig(n_factors=3, epochs=3, seed=5))
    rows = recommend_for_user(model, 0, 5, ds.item_train_counts())
    assert rows and all(path == "cf" for _, _, path in rows)


# ---------------------------------------------------------------- reporting

def test_report_json_is_canonical():
    report = EvalReport(0.5, 0.25, 0.1, 1.5, 7, alpha=0.3)
    assert report.to_json() == (
        '{"alpha": 0.3, "coverage": 0.1, "n_users_evaluated": 7, '
        '"precision": 0.5, "recall": 0.25, "rmse": 1.5}'
    )


def test_render_table_shapes():
    reports = [
        EvalReport(0.5, 0.25, 0.1, 1.5, 7, alpha=0.3),
        EvalReport(0.6, 0.30, 0.2, 1.4, 7, alpha=0.5),
    ]
    lines = render_table(reports).splitlines()
    assert len(lines) == 3
    assert "precision%" in lines[0] and "alpha" in lines[0]
    no_alpha = render_table([EvalReport(0.5, 0.25, 0.1, 1.5, 7)])
    assert "alpha" not in no_alpha.splitlines()[0]
