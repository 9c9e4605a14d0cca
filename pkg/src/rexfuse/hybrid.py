"""Fusion of latent-factor and semantic scores, cold-start scoring, joint training."""

import math
from dataclasses import dataclass, field

import numpy as np

from .dataset import InteractionDataset, ItemTextCorpus
from .mf import (
    FUSION_ADDITIVE,
    FUSION_CONVEX,
    FactorModel,
    TrainConfig,
    TrainingDiverged,
    _check_index,
    epoch_shuffle,
    init_factors,
    loss_regularized,
    predict_mf,
)
from .semantic import ItemEmbeddingTable, embed_corpus

DEFAULT_EMBED_DIM = 64


@dataclass
class HybridModel:
    """Latent factors plus a learned projection of item embeddings.

    ``projection`` maps embedding space into latent space so the semantic
    contribution for (u, i) is the scalar P_u . (projection @ E_i).  With the
    default additive fusion the full score is the collaborative dot product
    plus ``alpha`` times that scalar; the convex mode blends the two sides as
    (1 - alpha) * cf + alpha * semantic instead.
    """

    factors: FactorModel
    projection: np.ndarray  # (n_factors, embedding dim)
    embeddings: ItemEmbeddingTable
    alpha: float
    fusion: str = FUSION_ADDITIVE
    _projected: np.ndarray = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        expected = (self.factors.n_factors, self.embeddings.dim)
        if self.projection.shape != expected:
            raise ValueError(
                f"projection shape {self.projection.shape} does not match {expected}"
            )
        if not (math.isfinite(self.alpha) and self.alpha >= 0):
            raise ValueError(f"alpha must be finite and >= 0, got {self.alpha}")
        if self.fusion not in (FUSION_ADDITIVE, FUSION_CONVEX):
            raise ValueError(f"unknown fusion mode {self.fusion!r}")

    @property
    def n_users(self) -> int:
        return self.factors.n_users

    @property
    def n_items(self) -> int:
        return self.factors.n_items

    def projected_items(self) -> np.ndarray:
        """(n_items, n_factors) matrix of projected embeddings, zero for items without one."""
        if self._projected is None:
            dense = self.embeddings.dense(self.n_items)
            self._projected = dense @ self.projection.T
        return self._projected

    def semantic_scores(self, u: int, items: np.ndarray) -> np.ndarray:
        _check_index(u, self.n_users, "user")
        return self.projected_items()[items] @ self.factors.user_factors[u]

    def score_items(self, u: int, items: np.ndarray) -> np.ndarray:
        cf = self.factors.score_items(u, items)
        if self.alpha == 0.0 and self.fusion == FUSION_ADDITIVE:
            return cf
        sem = self.semantic_scores(u, items)
        if self.fusion == FUSION_ADDITIVE:
            return cf + self.alpha * sem
        return (1.0 - self.alpha) * cf + self.alpha * sem

    def predict_pairs(self, users: np.ndarray, items: np.ndarray) -> np.ndarray:
        cf = self.factors.predict_pairs(users, items)
        if self.alpha == 0.0 and self.fusion == FUSION_ADDITIVE:
            return cf
        sem = np.einsum(
            "ij,ij->i", self.factors.user_factors[users], self.projected_items()[items]
        )
        if self.fusion == FUSION_ADDITIVE:
            return cf + self.alpha * sem
        return (1.0 - self.alpha) * cf + self.alpha * sem


def semantic_score(model: HybridModel, u: int, i: int) -> float:
    """User affinity to the projected item embedding; 0 for items without one."""
    _check_index(u, model.n_users, "user")
    _check_index(i, model.n_items, "item")
    vec = model.embeddings.get(i)
    if vec is None:
        return 0.0
    return float(model.factors.user_factors[u] @ (model.projection @ vec))


def predict_hybrid(model: HybridModel, u: int, i: int) -> float:
    """Fused score; at alpha=0 (additive) this is exactly the factor prediction."""
    if model.alpha == 0.0 and model.fusion == FUSION_ADDITIVE:
        return predict_mf(model.factors, u, i)
    cf = predict_mf(model.factors, u, i)
    sem = semantic_score(model, u, i)
    if model.fusion == FUSION_ADDITIVE:
        return cf + model.alpha * sem
    return (1.0 - model.alpha) * cf + model.alpha * sem


def predict_cold_start(model: HybridModel, u: int, i: int) -> float:
    """Pure content score P_u . (projection @ E_i); the item factors are ignored.

    Meant for items with no training interactions.  Raises when the item has
    no embedding at all (nothing to score it from).
    """
    _check_index(u, model.n_users, "user")
    _check_index(i, model.n_items, "item")
    vec = model.embeddings.get(i)
    if vec is None:
        raise ValueError(f"cold item without content: item {i} has no text or embedding")
    return float(model.factors.user_factors[u] @ (model.projection @ vec))


def resolve_embeddings(source, dim=None) -> ItemEmbeddingTable:
    """Accept either a ready embedding table or a text corpus to hash."""
    if isinstance(source, ItemEmbeddingTable):
        return source
    if isinstance(source, ItemTextCorpus):
        return embed_corpus(source, dim or DEFAULT_EMBED_DIM)
    raise TypeError(f"expected ItemEmbeddingTable or ItemTextCorpus, got {type(source)!r}")


def train_hybrid(
    dataset: InteractionDataset,
    embeddings_source,
    config: TrainConfig,
    alpha: float,
    fusion: str = FUSION_ADDITIVE,
    embed_dim: int = None,
):
    """Jointly train user factors, item factors, and the projection by SGD.

    Predictions during training use the fused score; with error e and
    v = projection @ E_i the additive-mode updates are

        P_u <- P_u - lr * (e * (Q_i + alpha * v) + reg * P_u)
        Q_i <- Q_i - lr * (e * P_u + reg * Q_i)
        W   <- W   - lr * (alpha * e * outer(P_u, E_i) + reg * W)

    from the pre-update row values.  Embeddings themselves stay frozen.  At
    alpha=0 the parameter path for P and Q is identical to plain factor
    training (the projection only sees its decay term).  Returns the model
    and the per-epoch regularized training loss.
    """
    if len(dataset.train) == 0:
        raise ValueError("training split is empty")
    if not (math.isfinite(alpha) and alpha >= 0):
        raise ValueError(f"alpha must be finite and >= 0, got {alpha}")
    if fusion not in (FUSION_ADDITIVE, FUSION_CONVEX):
        raise ValueError(f"unknown fusion mode {fusion!r}")
    table = resolve_embeddings(embeddings_source, embed_dim)
    if len(table) == 0:
        raise ValueError("no item has an embedding; hybrid training needs at least one")

    rng = np.random.default_rng(config.seed)
    factors = init_factors(dataset.n_users, dataset.n_items, config, rng=rng)
    W = rng.uniform(-config.init_scale, config.init_scale, (config.n_factors, table.dim))

    P, Q = factors.user_factors, factors.item_factors
    E = table.dense(dataset.n_items)
    tu, ti, tr = dataset.train.users, dataset.train.items, dataset.train.ratings
    lr, lam = config.learning_rate, config.reg
    decay = 1.0 - lr * lam
    convex = fusion == FUSION_CONVEX
    cf_w = 1.0 - alpha if convex else 1.0

    losses = []
    with np.errstate(over="ignore", invalid="ignore"):
        for epoch in range(config.epochs):
            for idx in epoch_shuffle(config.seed, epoch, len(tu)):
                u, i, y = tu[idx], ti[idx], tr[idx]
                pu, qi = P[u], Q[i]
                if alpha == 0.0 and not convex:
                    # same arithmetic as plain factor training, bit for bit
                    err = pu @ qi - y
                    new_pu = pu - lr * (err * qi + lam * pu)
                    new_qi = qi - lr * (err * pu + lam * qi)
                    W *= decay
                else:
                    ei = E[i]
                    v = W @ ei
                    err = cf_w * (pu @ qi) + alpha * (pu @ v) - y
                    new_pu = pu - lr * (err * (cf_w * qi + alpha * v) + lam * pu)
                    new_qi = qi - lr * (err * cf_w * pu + lam * qi)
                    W -= lr * ((alpha * err) * np.outer(pu, ei) + lam * W)
                P[u] = new_pu
                Q[i] = new_qi
            loss = loss_regularized(
                factors, dataset.train, lam,
                projection=W, embeddings=E, alpha=alpha, fusion=fusion,
            )
            if not math.isfinite(loss):
                raise TrainingDiverged(
                    f"training loss became non-finite at epoch {epoch + 1}; "
                    f"try a smaller learning rate than {lr}"
                )
            losses.append(loss)

    model = HybridModel(
        factors=factors, projection=W, embeddings=table, alpha=alpha, fusion=fusion
    )
    return model, losses
