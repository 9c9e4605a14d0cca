"""Interaction and item-text ingestion, dense indexing, and deterministic splits."""

import csv
import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

TRAIN_PCT = 70
VALIDATION_PCT = 15


@dataclass(frozen=True)
class Interaction:
    """A single user-item rating event with external (string) ids."""

    user: str
    item: str
    rating: float
    timestamp: Optional[int] = None


class IdIndex:
    """Bidirectional map between external string ids and dense indices 0..n-1.

    Dense indices are assigned in first-appearance order, so the same input
    file always yields the same index.
    """

    def __init__(self, ids=()):
        self._forward = {}
        self._backward = []
        for ext in ids:
            if ext not in self._forward:
                self._forward[ext] = len(self._backward)
                self._backward.append(ext)

    def index(self, external_id: str) -> int:
        return self._forward[external_id]

    def id(self, dense_index: int) -> str:
        return self._backward[dense_index]

    def __contains__(self, external_id) -> bool:
        return external_id in self._forward

    def __len__(self) -> int:
        return len(self._backward)

    def __eq__(self, other) -> bool:
        return isinstance(other, IdIndex) and self._backward == other._backward

    @property
    def ids(self) -> list:
        """External ids in dense order."""
        return list(self._backward)


@dataclass(frozen=True)
class RatingTriples:
    """Parallel arrays of (user index, item index, rating)."""

    users: np.ndarray
    items: np.ndarray
    ratings: np.ndarray

    def __len__(self) -> int:
        return len(self.users)

    def rows(self):
        """Iterate (u, i, rating) tuples."""
        return zip(self.users.tolist(), self.items.tolist(), self.ratings.tolist())

    @classmethod
    def empty(cls) -> "RatingTriples":
        return cls(
            np.empty(0, dtype=np.int64),
            np.empty(0, dtype=np.int64),
            np.empty(0, dtype=np.float64),
        )

    @classmethod
    def from_rows(cls, rows) -> "RatingTriples":
        rows = list(rows)
        users = np.array([r[0] for r in rows], dtype=np.int64)
        items = np.array([r[1] for r in rows], dtype=np.int64)
        ratings = np.array([r[2] for r in rows], dtype=np.float64)
        return cls(users, items, ratings)


@dataclass(frozen=True)
class InteractionDataset:
    """Indexed interactions partitioned into train/validation/test."""

    users: IdIndex
    items: IdIndex
    train: RatingTriples
    validation: RatingTriples
    test: RatingTriples

    @property
    def n_users(self) -> int:
        return len(self.users)

    @property
    def n_items(self) -> int:
        return len(self.items)

    def item_train_counts(self) -> np.ndarray:
        """Number of training interactions per item; 0 marks a cold item."""
        return np.bincount(self.train.items, minlength=self.n_items)


@dataclass(frozen=True)
class ItemTextCorpus:
    """Raw item texts keyed by dense item index."""

    texts: dict = field(default_factory=dict)
    skipped: int = 0

    def __len__(self) -> int:
        return len(self.texts)

    def get(self, item_index: int) -> str:
        """Text for an item; missing entries read as empty."""
        return self.texts.get(item_index, "")


def _parse_rating(raw: str, path, lineno: int) -> float:
    try:
        rating = float(raw)
    except ValueError:
        raise ValueError(f"{path}:{lineno}: non-numeric rating {raw!r}") from None
    if not math.isfinite(rating):
        raise ValueError(f"{path}:{lineno}: non-finite rating {raw!r}")
    return rating


def _parse_timestamp(raw: str, path, lineno: int) -> Optional[int]:
    raw = raw.strip()
    if not raw:
        return None
    try:
        return int(raw)
    except ValueError:
        raise ValueError(f"{path}:{lineno}: non-integer timestamp {raw!r}") from None


def _load_movielens100k(path) -> list:
    interactions = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n").rstrip("\r")
            if not line.strip():
                continue
            fields = line.split("\t")
            if len(fields) != 4:
                raise ValueError(
                    f"{path}:{lineno}: expected 4 tab-separated fields, got {len(fields)}"
                )
            user, item, rating_raw, ts_raw = fields
            if not user or not item:
                raise ValueError(f"{path}:{lineno}: empty user or item id")
            interactions.append(
                Interaction(
                    user=user,
                    item=item,
                    rating=_parse_rating(rating_raw, path, lineno),
                    timestamp=_parse_timestamp(ts_raw, path, lineno),
                )
            )
    return interactions


_CSV_BASE_HEADER = ["user_id", "item_id", "rating"]


def _load_csv(path) -> list:
    interactions = []
    with open(path, encoding="utf-8-sig", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        has_timestamp = header == _CSV_BASE_HEADER + ["timestamp"]
        if not has_timestamp and header != _CSV_BASE_HEADER:
            raise ValueError(
                f"{path}:1: expected header user_id,item_id,rating[,timestamp], got {','.join(header)}"
            )
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not f.strip() for f in row):
                continue
            if len(row) != len(header):
                raise ValueError(
                    f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}"
                )
            user, item = row[0], row[1]
            if not user or not item:
                raise ValueError(f"{path}:{lineno}: empty user or item id")
            ts = _parse_timestamp(row[3], path, lineno) if has_timestamp else None
            interactions.append(
                Interaction(
                    user=user,
                    item=item,
                    rating=_parse_rating(row[2], path, lineno),
                    timestamp=ts,
                )
            )
    return interactions


def load_interactions(path, format: str = "movielens100k") -> list:
    """Load interactions from disk.

    Formats:
      movielens100k -- tab-separated ``user<TAB>item<TAB>rating<TAB>timestamp``
      csv           -- comma-separated with header ``user_id,item_id,rating[,timestamp]``

    Raises ValueError naming the offending line on malformed input, and on
    files that contain no interactions at all.
    """
    if format == "movielens100k":
        interactions = _load_movielens100k(path)
    elif format == "csv":
        interactions = _load_csv(path)
    else:
        raise ValueError(f"unknown interaction format {format!r}")
    if not interactions:
        raise ValueError(f"{path}: no interactions found")
    return interactions


def split_sizes(n: int) -> tuple:
    """Train/validation/test sizes: floor(0.70 n), floor(0.85 n) - floor(0.70 n), rest.

    Integer arithmetic so the cut points are exact for every n.
    """
    n_train = (TRAIN_PCT * n) // 100
    n_train_val = ((TRAIN_PCT + VALIDATION_PCT) * n) // 100
    return n_train, n_train_val - n_train, n - n_train_val


def build_dataset(interactions, split_seed: int) -> InteractionDataset:
    """Index interactions and split them 70/15/15 with a seeded shuffle.

    Indices are assigned in first-appearance order over the input list; the
    split applies a deterministic random permutation seeded by ``split_seed``
    before cutting.  Identical inputs and seed give identical datasets.
    """
    n = len(interactions)
    if n < 3:
        raise ValueError(f"need at least 3 interactions to split, got {n}")

    users = IdIndex(inter.user for inter in interactions)
    items = IdIndex(inter.item for inter in interactions)

    u = np.array([users.index(inter.user) for inter in interactions], dtype=np.int64)
    i = np.array([items.index(inter.item) for inter in interactions], dtype=np.int64)
    r = np.array([inter.rating for inter in interactions], dtype=np.float64)

    perm = np.random.default_rng(split_seed).permutation(n)
    u, i, r = u[perm], i[perm], r[perm]

    n_train, n_val, _ = split_sizes(n)
    cut1, cut2 = n_train, n_train + n_val

    def section(lo, hi):
        return RatingTriples(u[lo:hi].copy(), i[lo:hi].copy(), r[lo:hi].copy())

    return InteractionDataset(
        users=users,
        items=items,
        train=section(0, cut1),
        validation=section(cut1, cut2),
        test=section(cut2, n),
    )


def load_item_text(path, items: IdIndex) -> ItemTextCorpus:
    """Load a JSON-lines file of ``{"item_id": ..., "text": ...}`` records.

    Records whose item_id is not in ``items`` are skipped and counted in the
    returned corpus's ``skipped`` field.  Malformed lines raise ValueError
    naming the line number.
    """
    texts = {}
    skipped = 0
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
                or not isinstance(record.get("text"), str)
            ):
                raise ValueError(
                    f"{path}:{lineno}: expected object with string fields item_id and text"
                )
            if record["item_id"] not in items:
                skipped += 1
                continue
            texts[items.index(record["item_id"])] = record["text"]
    return ItemTextCorpus(texts=texts, skipped=skipped)
