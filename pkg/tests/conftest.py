import os

import numpy as np
import pytest

from ucmf import RatingDataset, TagCatalog


def make_dataset(triples, n_users=None, n_items=None):
    """Dataset from a list of (user, item, rating) triples."""
    users = np.array([t[0] for t in triples], dtype=np.int64)
    items = np.array([t[1] for t in triples], dtype=np.int64)
    ratings = np.array([t[2] for t in triples], dtype=np.float64)
    return RatingDataset(
        users, items, ratings,
        n_users if n_users is not None else users.max() + 1,
        n_items if n_items is not None else items.max() + 1,
    )


def random_dataset(rng, n_users, n_items, density=0.5, integer=True):
    triples = []
    for i in range(n_users):
        for j in range(n_items):
            if rng.random() < density:
                r = float(rng.integers(1, 6)) if integer else float(rng.uniform(1, 5))
                triples.append((i, j, r))
    if not triples:
        triples.append((0, 0, 3.0))
    return make_dataset(triples, n_users, n_items)


def make_tags(item_tags, n_tags=None):
    """TagCatalog from a list of iterables of tag indices, one per item."""
    sets = [frozenset(t) for t in item_tags]
    h = n_tags if n_tags is not None else (max((max(s) for s in sets if s), default=-1) + 1)
    return TagCatalog(
        n_tags=h,
        tag_name_map={f"tag{i}": i for i in range(h)},
        item_tags=sets,
    )


@pytest.fixture
def tiny_files(tmp_path):
    """Small MovieLens-format ratings and movies files on disk."""
    ratings = tmp_path / "ratings.dat"
    ratings.write_text(
        "1::11::5::100\n"
        "1::12::3::101\n"
        "2::11::4::102\n"
        "2::13::2::103\n"
        "3::12::1::104\n"
        "3::13::5::105\n"
        "4::11::3::106\n"
        "4::12::4::107\n"
        "4::13::1::108\n"
        "5::11::2::109\n"
    )
    movies = tmp_path / "movies.dat"
    movies.write_text(
        "11::Toy Story (1995)::Animation|Children's|Comedy\n"
        "12::Heat (1995)::Action|Crime|Thriller\n"
        "13::Café Drama (1996)::Drama\n"
        "14::Unrated Movie (1999)::Comedy\n",
        encoding="latin-1",
    )
    return ratings, movies


def ml1m_paths():
    """Paths to the real MovieLens 1M files, or None if unavailable.

    Set UCMF_ML1M_DIR to a directory containing ratings.dat and movies.dat.
    """
    root = os.environ.get("UCMF_ML1M_DIR", "data/ml-1m")
    ratings = os.path.join(root, "ratings.dat")
    movies = os.path.join(root, "movies.dat")
    if os.path.exists(ratings) and os.path.exists(movies):
        return ratings, movies
    return None


requires_ml1m = pytest.mark.skipif(
    ml1m_paths() is None,
    reason="MovieLens 1M not available (set UCMF_ML1M_DIR to the ml-1m directory)",
)
