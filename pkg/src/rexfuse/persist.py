"""Model persistence: a single self-describing JSON document per trained model."""

import json
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .dataset import IdIndex
from .hybrid import HybridModel
from .mf import FactorModel, TrainConfig
from .semantic import ItemEmbeddingTable

FORMAT_VERSION = 1

MODE_MF = "mf"
MODE_HYBRID = "hybrid"


@dataclass
class ModelBundle:
    """A trained model plus everything needed to evaluate and recommend later.

    ``split_seed`` lets evaluation rebuild the exact train/test partition from
    the original data file; ``item_train_counts`` marks cold items (count 0)
    for recommendation-time routing.
    """

    mode: str
    model: Union[FactorModel, HybridModel]
    users: IdIndex
    items: IdIndex
    config: TrainConfig
    split_seed: int
    item_train_counts: np.ndarray
    embedding_provider: Optional[dict] = None


def _config_to_dict(config: TrainConfig) -> dict:
    return {
        "n_factors": config.n_factors,
        "learning_rate": config.learning_rate,
        "reg": config.reg,
        "epochs": config.epochs,
        "init_scale": config.init_scale,
        "seed": config.seed,
    }


def save_bundle(bundle: ModelBundle, path) -> None:
    """Write the bundle as version-1 JSON; floats round-trip exactly."""
    if bundle.mode not in (MODE_MF, MODE_HYBRID):
        raise ValueError(f"unknown model mode {bundle.mode!r}")
    hybrid = bundle.mode == MODE_HYBRID
    model = bundle.model
    factors = model.factors if hybrid else model

    doc = {
        "version": FORMAT_VERSION,
        "mode": bundle.mode,
        "n_factors": factors.n_factors,
        "embedding_dim": model.embeddings.dim if hybrid else None,
        "alpha": model.alpha if hybrid else None,
        "fusion": model.fusion if hybrid else None,
        "users": bundle.users.ids,
        "items": bundle.items.ids,
        "user_factors": factors.user_factors.tolist(),
        "item_factors": factors.item_factors.tolist(),
        "projection": model.projection.tolist() if hybrid else None,
        "embeddings": None,
        "item_train_counts": np.asarray(bundle.item_train_counts).tolist(),
        "train_config": _config_to_dict(bundle.config),
        "split_seed": bundle.split_seed,
        "embedding_provider": bundle.embedding_provider,
    }
    if hybrid:
        n_items = factors.n_items
        doc["embeddings"] = [
            vec.tolist() if (vec := model.embeddings.get(i)) is not None else None
            for i in range(n_items)
        ]
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)
        fh.write("\n")


def load_bundle(path) -> ModelBundle:
    """Read a model file, rejecting unknown versions and malformed shapes."""
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    version = doc.get("version")
    if version != FORMAT_VERSION:
        raise ValueError(
            f"{path}: unsupported model file version {version!r} (expected {FORMAT_VERSION})"
        )
    mode = doc.get("mode")
    if mode not in (MODE_MF, MODE_HYBRID):
        raise ValueError(f"{path}: unknown model mode {mode!r}")

    factors = FactorModel(
        user_factors=np.array(doc["user_factors"], dtype=np.float64),
        item_factors=np.array(doc["item_factors"], dtype=np.float64),
    )
    if mode == MODE_HYBRID:
        vectors = {
            i: np.array(vec, dtype=np.float64)
            for i, vec in enumerate(doc["embeddings"])
            if vec is not None
        }
        table = ItemEmbeddingTable(dim=doc["embedding_dim"], vectors=vectors)
        model = HybridModel(
            factors=factors,
            projection=np.array(doc["projection"], dtype=np.float64),
            embeddings=table,
            alpha=doc["alpha"],
            fusion=doc["fusion"],
        )
    else:
        model = factors

    cfg = doc["train_config"]
    return ModelBundle(
        mode=mode,
        model=model,
        users=IdIndex(doc["users"]),
        items=IdIndex(doc["items"]),
        config=TrainConfig(
            n_factors=cfg["n_factors"],
            learning_rate=cfg["learning_rate"],
            reg=cfg["reg"],
            epochs=cfg["epochs"],
            init_scale=cfg["init_scale"],
            seed=cfg["seed"],
        ),
        split_seed=doc["split_seed"],
        item_train_counts=np.array(doc["item_train_counts"], dtype=np.int64),
        embedding_provider=doc.get("embedding_provider"),
    )
