"""Item text embeddings: deterministic hashed bag-of-words and precomputed-file providers."""

import json
import math
import re
from dataclasses import dataclass, field

import numpy as np

from .dataset import IdIndex, ItemTextCorpus

_FNV64_OFFSET = 0xCBF29CE484222325
_FNV64_PRIME = 0x100000001B3
_MASK64 = (1 << 64) - 1

# maximal runs of alphanumerics (\w minus underscore), Unicode-aware
_TOKEN_RE = re.compile(r"[^\W_]+")


def fnv1a64(data: bytes) -> int:
    """64-bit FNV-1a hash."""
    h = _FNV64_OFFSET
    for byte in data:
        h = ((h ^ byte) * _FNV64_PRIME) & _MASK64
    return h


def embed_hashed_bow(text: str, dim: int) -> np.ndarray:
    """Embed text as a signed, hashed bag-of-words vector.

    Tokens are maximal alphanumeric runs of the lowercased text.  Each token
    hashes with 64-bit FNV-1a to pick a bucket (hash mod dim) and a sign
    (+1 when the top hash bit is 0, else -1).  The accumulated vector is
    L2-normalized; text with no tokens gives the zero vector.  The result is
    bit-exact across runs and platforms.
    """
    if dim < 1:
        raise ValueError(f"embedding dim must be >= 1, got {dim}")
    vec = np.zeros(dim, dtype=np.float64)
    for token in _TOKEN_RE.findall(text.lower()):
        h = fnv1a64(token.encode("utf-8"))
        sign = 1.0 if h < 1 << 63 else -1.0
        vec[h % dim] += sign
    norm = math.sqrt(float(vec @ vec))
    if norm > 0.0:
        vec /= norm
    return vec


@dataclass(frozen=True)
class ItemEmbeddingTable:
    """Per-item embedding vectors, keyed by dense item index.

    Items without text or without a file entry simply have no row; callers
    treat a missing row as the zero vector.
    """

    dim: int
    vectors: dict = field(default_factory=dict)
    skipped: int = 0

    def __post_init__(self):
        for idx, vec in self.vectors.items():
            if vec.shape != (self.dim,):
                raise ValueError(
                    f"embedding for item {idx} has length {vec.shape[0]}, expected {self.dim}"
                )

    def __len__(self) -> int:
        return len(self.vectors)

    def __contains__(self, item_index) -> bool:
        return item_index in self.vectors

    def get(self, item_index: int):
        """Vector for an item, or None when the item has no embedding."""
        return self.vectors.get(item_index)

    def dense(self, n_items: int) -> np.ndarray:
        """(n_items, dim) matrix with zero rows for items without embeddings."""
        out = np.zeros((n_items, self.dim), dtype=np.float64)
        for idx, vec in self.vectors.items():
            out[idx] = vec
        return out


def embed_corpus(corpus: ItemTextCorpus, dim: int) -> ItemEmbeddingTable:
    """Hashed bag-of-words embeddings for every item that has text."""
    vectors = {idx: embed_hashed_bow(text, dim) for idx, text in corpus.texts.items()}
    return ItemEmbeddingTable(dim=dim, vectors=vectors)


def load_embeddings_file(path, items: IdIndex) -> ItemEmbeddingTable:
    """Load precomputed embeddings from a JSON-lines file.

    Each line is ``{"item_id": str, "vector": [numbers]}``.  The first line
    fixes the dimension; later lines with a different length raise ValueError
    naming the line, as do non-finite values.  Unknown item_ids are skipped
    and counted.
    """
    vectors = {}
    skipped = 0
    dim = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}:{lineno}: malformed JSON ({exc.msg})") from None
            if (
                not isinstance(record, dict)
                or not isinstance(record.get("item_id"), str)
                or not isinstance(record.get("vector"), list)
            ):
                raise ValueError(
                    f"{path}:{lineno}: expected object with item_id and vector fields"
                )
            vec = np.array(record["vector"], dtype=np.float64)
            if vec.ndim != 1 or vec.size == 0:
                raise ValueError(f"{path}:{lineno}: vector must be a non-empty flat list")
            if dim is None:
                dim = vec.size
            elif vec.size != dim:
                raise ValueError(
                    f"{path}:{lineno}: vector has length {vec.size}, expected {dim}"
                )
            if not np.all(np.isfinite(vec)):
                raise ValueError(f"{path}:{lineno}: vector contains non-finite values")
            if record["item_id"] not in items:
                skipped += 1
                continue
            vectors[items.index(record["item_id"])] = vec
    if dim is None:
        raise ValueError(f"{path}: no embeddings found")
    return ItemEmbeddingTable(dim=dim, vectors=vectors, skipped=skipped)


def project(matrix: np.ndarray, vec: np.ndarray) -> np.ndarray:
    """Map an embedding vector into latent space: matrix @ vec.

    ``matrix`` has shape (n_factors, dim); raises on a dimension mismatch.
    """
    if matrix.ndim != 2 or vec.ndim != 1 or matrix.shape[1] != vec.shape[0]:
        raise ValueError(
            f"cannot project vector of length {vec.shape[0] if vec.ndim == 1 else vec.shape} "
            f"with matrix of shape {matrix.shape}"
        )
    return matrix @ vec
