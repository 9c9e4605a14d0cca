"""Latent-factor model: dot-product scoring and regularized SGD training."""

import math
from dataclasses import dataclass

import numpy as np

from .dataset import InteractionDataset, RatingTriples
from .semantic import ItemEmbeddingTable

FUSION_ADDITIVE = "additive"
FUSION_CONVEX = "convex"


class TrainingDiverged(RuntimeError):
    """Raised when the training loss becomes non-finite."""


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters for SGD training.

    ``reg`` penalizes squared parameter norms; everything else is the usual
    SGD plumbing.  ``seed`` drives initialization and the per-epoch shuffle,
    so identical configs always reproduce identical models.
    """

    n_factors: int = 32
    learning_rate: float = 0.005
    reg: float = 0.02
    epochs: int = 30
    init_scale: float = 0.05
    seed: int = 42

    def __post_init__(self):
        if self.n_factors < 1:
            raise ValueError(f"n_factors must be positive, got {self.n_factors}")
        if not self.learning_rate > 0:
            raise ValueError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.reg < 0:
            raise ValueError(f"reg must be non-negative, got {self.reg}")
        if self.epochs < 1:
            raise ValueError(f"epochs must be positive, got {self.epochs}")
        if not self.init_scale >= 0:
            raise ValueError(f"init_scale must be non-negative, got {self.init_scale}")


@dataclass
class FactorModel:
    """User and item latent factors; a prediction is their dot product."""

    user_factors: np.ndarray  # (n_users, n_factors)
    item_factors: np.ndarray  # (n_items, n_factors)

    @property
    def n_users(self) -> int:
        return self.user_factors.shape[0]

    @property
    def n_items(self) -> int:
        return self.item_factors.shape[0]

    @property
    def n_factors(self) -> int:
        return self.user_factors.shape[1]

    def score_items(self, u: int, items: np.ndarray) -> np.ndarray:
        """Scores for one user against an array of item indices."""
        _check_index(u, self.n_users, "user")
        return self.item_factors[items] @ self.user_factors[u]

    def predict_pairs(self, users: np.ndarray, items: np.ndarray) -> np.ndarray:
        return np.einsum(
            "ij,ij->i", self.user_factors[users], self.item_factors[items]
        )


def _check_index(idx, n, kind):
    if not 0 <= idx < n:
        raise IndexError(f"{kind} index {idx} out of range [0, {n})")


def init_factors(n_users: int, n_items: int, config: TrainConfig, rng=None) -> FactorModel:
    """Uniform [-init_scale, +init_scale] factors from a seeded generator.

    Passing an existing ``rng`` lets callers draw further parameters from the
    same stream (the user/item draws always come first, in that order).
    """
    if n_users < 1 or n_items < 1:
        raise ValueError(f"need positive counts, got {n_users} users, {n_items} items")
    if rng is None:
        rng = np.random.default_rng(config.seed)
    scale = config.init_scale
    return FactorModel(
        user_factors=rng.uniform(-scale, scale, (n_users, config.n_factors)),
        item_factors=rng.uniform(-scale, scale, (n_items, config.n_factors)),
    )


def predict_mf(model: FactorModel, u: int, i: int) -> float:
    """Dot product of user and item factors."""
    _check_index(u, model.n_users, "user")
    _check_index(i, model.n_items, "item")
    return float(model.user_factors[u] @ model.item_factors[i])


def loss_mse(pairs) -> float:
    """Mean squared error over (predicted, actual) pairs."""
    arr = np.asarray(list(pairs), dtype=np.float64)
    if arr.size == 0:
        raise ValueError("loss_mse needs at least one (predicted, actual) pair")
    diff = arr[:, 0] - arr[:, 1]
    return float(np.mean(diff * diff))


def _fused_predictions(model, data, projection, embed_matrix, alpha, fusion):
    """Vectorized predictions over rating triples, plain or fused."""
    cf = model.predict_pairs(data.users, data.items)
    if projection is None or (alpha == 0.0 and fusion == FUSION_ADDITIVE):
        return cf
    projected = embed_matrix[data.items] @ projection.T
    sem = np.einsum("ij,ij->i", model.user_factors[data.users], projected)
    if fusion == FUSION_ADDITIVE:
        return cf + alpha * sem
    if fusion == FUSION_CONVEX:
        return (1.0 - alpha) * cf + alpha * sem
    raise ValueError(f"unknown fusion mode {fusion!r}")


def _resolve_embed_matrix(embeddings, n_items, projection):
    if embeddings is None:
        if projection is not None:
            raise ValueError("a projection was given without item embeddings")
        return None
    if isinstance(embeddings, ItemEmbeddingTable):
        return embeddings.dense(n_items)
    return np.asarray(embeddings, dtype=np.float64)


def loss_regularized(
    model: FactorModel,
    data: RatingTriples,
    reg: float,
    projection=None,
    embeddings=None,
    alpha: float = 0.0,
    fusion: str = FUSION_ADDITIVE,
) -> float:
    """Mean over interactions of (error^2 + reg * (||P_u||^2 + ||Q_i||^2 [+ ||W||_F^2])).

    Each interaction penalizes the rows it touches (plus the projection in
    hybrid mode), matching the per-touch decay the SGD updates apply.  With
    ``projection`` and ``embeddings`` present the error term uses fused
    predictions.
    """
    if len(data) == 0:
        raise ValueError("loss_regularized needs at least one interaction")
    if projection is not None and projection.shape[0] != model.n_factors:
        raise ValueError(
            f"projection shape {projection.shape} does not match n_factors {model.n_factors}"
        )
    embed_matrix = _resolve_embed_matrix(embeddings, model.n_items, projection)
    pred = _fused_predictions(model, data, projection, embed_matrix, alpha, fusion)
    err = pred - data.ratings
    mse = float(np.mean(err * err))
    user_energy = np.sum(model.user_factors**2, axis=1)
    item_energy = np.sum(model.item_factors**2, axis=1)
    penalty = float(np.mean(user_energy[data.users] + item_energy[data.items]))
    if projection is not None:
        penalty += float(np.sum(projection**2))
    return mse + reg * penalty


def loss_gradients(
    model: FactorModel,
    data: RatingTriples,
    reg: float,
    projection=None,
    embeddings=None,
    alpha: float = 0.0,
    fusion: str = FUSION_ADDITIVE,
):
    """Analytic gradients of the regularized objective.

    Returns (grad_user_factors, grad_item_factors, grad_projection); the last
    is None without a projection.  These are the exact derivatives of
    ``loss_regularized``, suitable for checking against finite differences.
    """
    if len(data) == 0:
        raise ValueError("loss_gradients needs at least one interaction")
    P, Q = model.user_factors, model.item_factors
    us, its, ys = data.users, data.items, data.ratings
    n = len(data)
    embed_matrix = _resolve_embed_matrix(embeddings, model.n_items, projection)

    pred = _fused_predictions(model, data, projection, embed_matrix, alpha, fusion)
    err = pred - ys

    if fusion == FUSION_ADDITIVE:
        cf_w, sem_w = 1.0, alpha
    elif fusion == FUSION_CONVEX:
        cf_w, sem_w = 1.0 - alpha, alpha
    else:
        raise ValueError(f"unknown fusion mode {fusion!r}")

    # per-interaction regularization: each row is penalized once per touch
    user_touches = np.bincount(us, minlength=model.n_users)
    item_touches = np.bincount(its, minlength=model.n_items)
    scale = 2.0 / n
    grad_P = scale * reg * user_touches[:, None] * P
    grad_Q = scale * reg * item_touches[:, None] * Q

    if projection is not None:
        projected = embed_matrix[its] @ projection.T  # (n, k)
        np.add.at(grad_P, us, scale * err[:, None] * (cf_w * Q[its] + sem_w * projected))
        np.add.at(grad_Q, its, scale * cf_w * err[:, None] * P[us])
        grad_W = 2.0 * reg * projection + scale * sem_w * (
            (err[:, None] * P[us]).T @ embed_matrix[its]
        )
    else:
        np.add.at(grad_P, us, scale * err[:, None] * Q[its])
        np.add.at(grad_Q, its, scale * err[:, None] * P[us])
        grad_W = None
    return grad_P, grad_Q, grad_W


def epoch_shuffle(seed: int, epoch: int, n: int) -> np.ndarray:
    """Deterministic visiting order for one epoch, seeded by (seed, epoch)."""
    return np.random.default_rng([seed, epoch]).permutation(n)


def train_mf(dataset: InteractionDataset, config: TrainConfig):
    """Train factors by per-interaction SGD on the squared error.

    Each epoch visits the training interactions in a fresh deterministic
    shuffle; with prediction error e, the touched rows move as

        P_u <- P_u - lr * (e * Q_i + reg * P_u)
        Q_i <- Q_i - lr * (e * P_u + reg * Q_i)

    using the pre-update values of both rows.  Returns the model and the
    regularized loss evaluated on the training split after each epoch.
    Raises TrainingDiverged when the loss stops being finite.
    """
    if len(dataset.train) == 0:
        raise ValueError("training split is empty")
    model = init_factors(dataset.n_users, dataset.n_items, config)
    P, Q = model.user_factors, model.item_factors
    tu, ti, tr = dataset.train.users, dataset.train.items, dataset.train.ratings
    lr, lam = config.learning_rate, config.reg

    losses = []
    with np.errstate(over="ignore", invalid="ignore"):
        for epoch in range(config.epochs):
            for idx in epoch_shuffle(config.seed, epoch, len(tu)):
                u, i, y = tu[idx], ti[idx], tr[idx]
                pu, qi = P[u], Q[i]
                err = pu @ qi - y
                new_pu = pu - lr * (err * qi + lam * pu)
                new_qi = qi - lr * (err * pu + lam * qi)
                P[u] = new_pu
                Q[i] = new_qi
            loss = loss_regularized(model, dataset.train, lam)
            if not math.isfinite(loss):
                raise TrainingDiverged(
                    f"training loss became non-finite at epoch {epoch + 1}; "
                    f"try a smaller learning rate than {lr}"
                )
            losses.append(loss)
    return model, losses
