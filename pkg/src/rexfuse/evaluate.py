"""Top-K recommendation and ranking metrics: precision, recall, coverage, RMSE."""

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .dataset import InteractionDataset, RatingTriples
from .hybrid import HybridModel, train_hybrid
from .mf import TrainConfig


@dataclass(frozen=True)
class EvalConfig:
    """Ranking-evaluation knobs.

    ``top_k`` is the recommendation list length, ``relevance_threshold`` the
    minimum test rating that counts as a hit, and ``exclude_train`` removes a
    user's training items from their candidate pool.  ``workers`` > 1 scores
    users in a thread pool; results are independent of execution order.
    """

    top_k: int = 10
    relevance_threshold: float = 4.0
    exclude_train: bool = True
    workers: int = 1

    def __post_init__(self):
        if self.top_k < 1:
            raise ValueError(f"top_k must be >= 1, got {self.top_k}")
        if self.workers < 1:
            raise ValueError(f"workers must be >= 1, got {self.workers}")


@dataclass(frozen=True)
class EvalReport:
    """One evaluation run: ranking metrics, rating error, and the swept alpha."""

    precision: float
    recall: float
    coverage: float
    rmse: float
    n_users_evaluated: int
    alpha: Optional[float] = None

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "precision": self.precision,
            "recall": self.recall,
            "coverage": self.coverage,
            "rmse": self.rmse,
            "n_users_evaluated": self.n_users_evaluated,
        }

    def to_json(self) -> str:
        """Canonical single-line JSON (stable key order, exact floats)."""
        return json.dumps(self.to_dict(), sort_keys=True)


def topk(model, u: int, k: int, exclude=(), n_items: int = None) -> list:
    """The k highest-scoring items for user u, skipping ``exclude``.

    Ties break toward the lower item index, so identical scores always give
    identical lists.  Returns fewer than k items only when the candidate
    pool is smaller.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    n = model.n_items if n_items is None else n_items
    mask = np.ones(n, dtype=bool)
    excluded = np.asarray(list(exclude), dtype=np.int64)
    if excluded.size:
        mask[excluded] = False
    candidates = np.flatnonzero(mask)
    if candidates.size == 0:
        return []
    scores = model.score_items(u, candidates)
    order = np.lexsort((candidates, -scores))[:k]
    return candidates[order].tolist()


def relevant_items_by_user(test: RatingTriples, threshold: float) -> dict:
    """Map user index -> set of test items rated at or above the threshold."""
    relevant = {}
    keep = test.ratings >= threshold
    for u, i in zip(test.users[keep].tolist(), test.items[keep].tolist()):
        relevant.setdefault(u, set()).add(i)
    return relevant


def precision_recall(recommendations: dict, test: RatingTriples, threshold: float):
    """Micro-averaged precision and recall over users with >= 1 relevant test item.

    precision = total hits / total recommended, recall = total hits / total
    relevant, both summed over evaluable users only.
    """
    relevant = relevant_items_by_user(test, threshold)
    if not relevant:
        raise ValueError(f"no user has a test item rated >= {threshold}")
    hits = n_recommended = n_relevant = 0
    for u, rel in relevant.items():
        rec = recommendations.get(u, [])
        hits += len(set(rec) & rel)
        n_recommended += len(rec)
        n_relevant += len(rel)
    precision = hits / n_recommended if n_recommended else 0.0
    return precision, hits / n_relevant


def coverage(recommendations: dict, n_items: int) -> float:
    """Fraction of the catalog appearing in at least one recommendation list."""
    if n_items < 1:
        raise ValueError(f"n_items must be >= 1, got {n_items}")
    seen = set()
    for rec in recommendations.values():
        seen.update(rec)
    return len(seen) / n_items


def rmse(model, test: RatingTriples) -> float:
    """Root mean squared prediction error over test interactions."""
    if len(test) == 0:
        raise ValueError("rmse needs a non-empty test set")
    err = model.predict_pairs(test.users, test.items) - test.ratings
    return math.sqrt(float(np.mean(err * err)))


def _train_items_by_user(train: RatingTriples) -> dict:
    by_user = {}
    for u, i in zip(train.users.tolist(), train.items.tolist()):
        by_user.setdefault(u, set()).add(i)
    return by_user


def evaluate_model(
    model, dataset: InteractionDataset, config: EvalConfig = EvalConfig(), alpha=None
) -> EvalReport:
    """Rank for every user with a relevant test item and score the result.

    Produces top-k lists (minus training items when configured), then
    micro-averaged precision/recall, catalog coverage of those lists, and
    RMSE over all test interactions.
    """
    relevant = relevant_items_by_user(dataset.test, config.relevance_threshold)
    if not relevant:
        raise ValueError(
            f"no user has a test item rated >= {config.relevance_threshold}"
        )
    users = sorted(relevant)
    train_items = _train_items_by_user(dataset.train) if config.exclude_train else {}

    def rank(u):
        return topk(model, u, config.top_k, exclude=train_items.get(u, ()))

    if config.workers > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            lists = list(pool.map(rank, users))
    else:
        lists = [rank(u) for u in users]
    recommendations = dict(zip(users, lists))

    precision, recall = precision_recall(
        recommendations, dataset.test, config.relevance_threshold
    )
    return EvalReport(
        precision=precision,
        recall=recall,
        coverage=coverage(recommendations, dataset.n_items),
        rmse=rmse(model, dataset.test),
        n_users_evaluated=len(users),
        alpha=alpha,
    )


def sweep_alpha(
    dataset: InteractionDataset,
    embeddings_source,
    config: TrainConfig,
    alphas,
    eval_config: EvalConfig = EvalConfig(),
    fusion: str = "additive",
) -> list:
    """Train one hybrid model per fusion weight (same seed) and evaluate each."""
    alphas = list(alphas)
    if not alphas:
        raise ValueError("alphas must be non-empty")
    reports = []
    for alpha in alphas:
        model, _ = train_hybrid(dataset, embeddings_source, config, alpha, fusion=fusion)
        reports.append(evaluate_model(model, dataset, eval_config, alpha=alpha))
    return reports


def recommend_for_user(model, u: int, k: int, item_train_counts, include_cold=False):
    """Ranked (item, score, path) rows for one user.

    Warm items (>= 1 training interaction) score through the model's fused
    prediction; items with no training interactions are hidden unless
    ``include_cold`` is set, in which case a hybrid model scores them through
    the pure content path.  Path labels: "cf" for factor-only models,
    "cf+semantic" for hybrid warm scores, "cold-start" for the content path.
    """
    counts = np.asarray(item_train_counts)
    is_hybrid = isinstance(model, HybridModel)
    warm_label = "cf+semantic" if is_hybrid else "cf"

    warm = np.flatnonzero(counts > 0)
    items_all = [warm]
    scores_all = [model.score_items(u, warm)] if warm.size else [np.empty(0)]
    labels = [warm_label] * warm.size

    if include_cold:
        cold = np.flatnonzero(counts == 0)
        if cold.size:
            items_all.append(cold)
            if is_hybrid:
                scores_all.append(model.semantic_scores(u, cold))
                labels.extend(["cold-start"] * cold.size)
            else:
                scores_all.append(model.score_items(u, cold))
                labels.extend([warm_label] * cold.size)

    items = np.concatenate(items_all)
    scores = np.concatenate(scores_all)
    if items.size == 0:
        return []
    order = np.lexsort((items, -scores))[:k]
    return [(int(items[j]), float(scores[j]), labels[j]) for j in order]


def render_table(reports) -> str:
    """Aligned text table, one row per report: precision, recall, coverage, rmse."""
    with_alpha = any(r.alpha is not None for r in reports)
    header = []
    if with_alpha:
        header.append(f"{'alpha':>6}")
    header += [
        f"{'precision%':>11}",
        f"{'recall%':>9}",
        f"{'coverage%':>10}",
        f"{'rmse':>8}",
        f"{'users':>6}",
    ]
    lines = ["  ".join(header)]
    for r in reports:
        row = []
        if with_alpha:
            row.append(f"{'-' if r.alpha is None else format(r.alpha, '.2f'):>6}")
        row += [
            f"{100 * r.precision:>11.2f}",
            f"{100 * r.recall:>9.2f}",
            f"{100 * r.coverage:>10.2f}",
            f"{r.rmse:>8.4f}",
            f"{r.n_users_evaluated:>6d}",
        ]
        lines.append("  ".join(row))
    return "\n".join(lines)
