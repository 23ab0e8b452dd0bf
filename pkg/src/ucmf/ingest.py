"""MovieLens-format ingestion: ratings, movie genres, and seeded train/test splits.

File formats (MovieLens 1M flavor):
  ratings: ``UserID::MovieID::Rating::Timestamp`` (timestamp ignored)
  movies:  ``MovieID::Title::Genre1|Genre2|...`` (title may contain single colons)

External ids are remapped to dense 0-based indices at parse time; all
downstream math runs on the dense index space.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp


class ParseError(ValueError):
    """Raised for malformed input files; message carries the line number."""


@dataclass(frozen=True)
class SplitSpec:
    """Train fraction and RNG seed for a random train/test partition."""

    train_fraction: float
    seed: int

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise ValueError(
                f"train_fraction must lie strictly in (0, 1), got {self.train_fraction}"
            )


class RatingDataset:
    """Sparse set of (user, item, rating) triples over a dense index space.

    Parameters
    ----------
    users, items : int arrays of equal length, dense 0-based indices
    ratings : float array of the same length
    n_users, n_items : size of the index space (may exceed the indices
        present, e.g. for a training split of a larger dataset)
    user_ids, item_ids : dense index -> external id (optional, defaults to
        the identity)
    """

    def __init__(self, users, items, ratings, n_users, n_items,
                 user_ids=None, item_ids=None):
        self.users = np.ascontiguousarray(users, dtype=np.int64)
        self.items = np.ascontiguousarray(items, dtype=np.int64)
        self.ratings = np.ascontiguousarray(ratings, dtype=np.float64)
        if not (len(self.users) == len(self.items) == len(self.ratings)):
            raise ValueError("users, items and ratings must have equal length")
        self.n_users = int(n_users)
        self.n_items = int(n_items)
        if len(self.users) and (self.users.min() < 0 or self.users.max() >= self.n_users):
            raise ValueError("user index out of range")
        if len(self.items) and (self.items.min() < 0 or self.items.max() >= self.n_items):
            raise ValueError("item index out of range")
        keys = self.users * self.n_items + self.items
        if len(np.unique(keys)) != len(keys):
            raise ValueError("duplicate (user, item) rating")
        self.user_ids = (np.arange(self.n_users) if user_ids is None
                         else np.asarray(user_ids))
        self.item_ids = (np.arange(self.n_items) if item_ids is None
                         else np.asarray(item_ids))
        self.user_id_map = {int(e): i for i, e in enumerate(self.user_ids)}
        self.item_id_map = {int(e): j for j, e in enumerate(self.item_ids)}
        self._by_user = None
        self._by_item = None
        self._csr = None

    def __len__(self):
        return len(self.ratings)

    @property
    def n_ratings(self):
        return len(self.ratings)

    def to_csr(self):
        """Ratings as an n_users x n_items CSR matrix (cached)."""
        if self._csr is None:
            self._csr = sp.csr_matrix(
                (self.ratings, (self.users, self.items)),
                shape=(self.n_users, self.n_items),
            )
        return self._csr

    def _group(self, keys, n):
        order = np.argsort(keys, kind="stable")
        bounds = np.searchsorted(keys[order], np.arange(n + 1))
        return order, bounds

    def by_user(self, i):
        """(item indices, ratings) of user ``i``, in stable order."""
        if self._by_user is None:
            self._by_user = self._group(self.users, self.n_users)
        order, bounds = self._by_user
        sel = order[bounds[i]:bounds[i + 1]]
        return self.items[sel], self.ratings[sel]

    def by_item(self, j):
        """(user indices, ratings) of item ``j``."""
        if self._by_item is None:
            self._by_item = self._group(self.items, self.n_items)
        order, bounds = self._by_item
        sel = order[bounds[j]:bounds[j + 1]]
        return self.users[sel], self.ratings[sel]

    def user_counts(self):
        return np.bincount(self.users, minlength=self.n_users)

    def item_counts(self):
        return np.bincount(self.items, minlength=self.n_items)

    def subset(self, idx):
        """New dataset of the selected triples, same index space and id maps."""
        return RatingDataset(
            self.users[idx], self.items[idx], self.ratings[idx],
            self.n_users, self.n_items, self.user_ids, self.item_ids,
        )


@dataclass
class TagCatalog:
    """Item -> tag-set mapping over ``n_tags`` distinct tag strings.

    ``item_tags[j]`` is a frozenset of tag indices for dense item index j.
    ``n_items_without_tags`` counts rated items absent from the movies file.
    """

    n_tags: int
    tag_name_map: dict
    item_tags: list
    n_items_without_tags: int = 0
    n_unknown_movies: int = 0
    tag_names: list = field(default_factory=list)

    def __post_init__(self):
        if not self.tag_names:
            self.tag_names = [None] * self.n_tags
            for name, h in self.tag_name_map.items():
                self.tag_names[h] = name

    def incidence(self, n_items):
        """Binary item x tag incidence matrix (CSR)."""
        rows, cols = [], []
        for j in range(n_items):
            for h in self.item_tags[j]:
                rows.append(j)
                cols.append(h)
        return sp.csr_matrix(
            (np.ones(len(rows)), (rows, cols)),
            shape=(n_items, max(self.n_tags, 1)),
        )


def _read_lines(path):
    data = Path(path).read_bytes()
    return data.decode("latin-1").splitlines()


def parse_ratings(path) -> RatingDataset:
    """Parse a MovieLens ratings file into a dense-index dataset.

    Raises ParseError (with the 1-based line number) on malformed lines,
    out-of-range ratings, duplicate (user, item) pairs, or an empty file.
    """
    lines = _read_lines(path)
    users, items, ratings = [], [], []
    user_map, item_map = {}, {}
    user_ids, item_ids = [], []
    seen = set()
    n_parsed = 0
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        fields = line.split("::")
        if len(fields) != 4:
            raise ParseError(f"{path}:{lineno}: expected 4 '::'-separated fields, got {len(fields)}")
        try:
            uid, mid, rating, _ts = (int(f) for f in fields)
        except ValueError:
            raise ParseError(f"{path}:{lineno}: non-integer field in {line!r}") from None
        if not 1 <= rating <= 5:
            raise ParseError(f"{path}:{lineno}: rating {rating} outside 1-5")
        i = user_map.setdefault(uid, len(user_map))
        if i == len(user_ids):
            user_ids.append(uid)
        j = item_map.setdefault(mid, len(item_map))
        if j == len(item_ids):
            item_ids.append(mid)
        if (i, j) in seen:
            raise ParseError(f"{path}:{lineno}: duplicate rating for user {uid}, movie {mid}")
        seen.add((i, j))
        users.append(i)
        items.append(j)
        ratings.append(float(rating))
        n_parsed += 1
    if n_parsed == 0:
        raise ParseError(f"{path}: no ratings found")
    return RatingDataset(
        np.array(users), np.array(items), np.array(ratings),
        len(user_ids), len(item_ids), np.array(user_ids), np.array(item_ids),
    )


def parse_movies(path, dataset: RatingDataset) -> TagCatalog:
    """Parse a MovieLens movies file into a tag catalog for ``dataset``.

    Genres of every movie in the file count toward the tag vocabulary;
    rated items missing from the file get an empty tag set (counted in
    ``n_items_without_tags``), movies never rated are counted in
    ``n_unknown_movies``.
    """
    lines = _read_lines(path)
    tag_map = {}
    item_tags = [None] * dataset.n_items
    n_unknown = 0
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        fields = line.split("::")
        if len(fields) != 3:
            raise ParseError(f"{path}:{lineno}: expected 'MovieID::Title::Genres'")
        mid_str, _title, genres = fields
        try:
            mid = int(mid_str)
        except ValueError:
            raise ParseError(f"{path}:{lineno}: non-integer movie id {mid_str!r}") from None
        tags = set()
        for g in genres.split("|"):
            g = g.strip()
            if g:
                tags.add(tag_map.setdefault(g, len(tag_map)))
        j = dataset.item_id_map.get(mid)
        if j is None:
            n_unknown += 1
        else:
            item_tags[j] = frozenset(tags)
    n_missing = sum(1 for t in item_tags if t is None)
    item_tags = [t if t is not None else frozenset() for t in item_tags]
    return TagCatalog(
        n_tags=len(tag_map),
        tag_name_map=tag_map,
        item_tags=item_tags,
        n_items_without_tags=n_missing,
        n_unknown_movies=n_unknown,
    )


def split(dataset: RatingDataset, spec: SplitSpec):
    """Seeded uniform partition into (train, test) with
    ``|train| = round(fraction * n)``.

    Raises ValueError if either side would be empty.
    """
    n = len(dataset)
    if n == 0:
        raise ValueError("cannot split an empty dataset")
    n_train = int(round(spec.train_fraction * n))
    if n_train == 0 or n_train == n:
        raise ValueError(
            f"fraction {spec.train_fraction} yields an empty train or test set for n={n}"
        )
    rng = np.random.default_rng(spec.seed)
    perm = rng.permutation(n)
    train_idx = np.sort(perm[:n_train])
    test_idx = np.sort(perm[n_train:])
    return dataset.subset(train_idx), dataset.subset(test_idx)
