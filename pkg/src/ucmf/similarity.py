"""User-user Vector Space Similarity and cluster-neighbor weights.

The similarity of two users is the cosine of their rating vectors
restricted to the items both rated; it lives in [0, 1] because ratings
are positive. Weights are assembled once per experiment, over all pairs
inside each cluster, into a symmetric sparse matrix.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from ucmf.ingest import RatingDataset
from ucmf.clustering import ClusterAssignment

# bounds user count per block in the all-pairs cluster computation
_BLOCK = 1024


def vss(i: int, f: int, train: RatingDataset) -> float:
    """Cosine similarity of users ``i`` and ``f`` over co-rated items.

    Returns 0.0 when they share no rated items.
    """
    items_i, r_i = train.by_user(i)
    items_f, r_f = train.by_user(f)
    common, idx_i, idx_f = np.intersect1d(items_i, items_f, assume_unique=True,
                                          return_indices=True)
    if len(common) == 0:
        return 0.0
    a = r_i[idx_i]
    b = r_f[idx_f]
    num = float(a @ b)
    denom = float(np.sqrt(a @ a) * np.sqrt(b @ b))
    return min(max(num / denom, 0.0), 1.0)


class NeighborWeights:
    """Per-user similarity weights to same-cluster users.

    ``matrix`` is a symmetric n_users x n_users sparse matrix holding
    Sim(i, f) for same-cluster pairs (zero-similarity pairs may be
    implicit zeros); ``labels`` preserves the cluster membership so
    ``neighbors(i)`` lists every co-member, including zero-weight ones.
    """

    def __init__(self, matrix: sp.csr_matrix, labels: np.ndarray):
        self.matrix = matrix.tocsr()
        self.labels = np.asarray(labels)
        self.weight_sums = np.asarray(self.matrix.sum(axis=1)).ravel()

    @property
    def n_users(self):
        return self.matrix.shape[0]

    def neighbors(self, i):
        """(user indices, weights) of all cluster co-members of ``i``."""
        others = np.flatnonzero(self.labels == self.labels[i])
        others = others[others != i]
        row = self.matrix[i]
        weights = np.asarray(row[:, others].todense()).ravel()
        return others, weights

    def weight_sum(self, i):
        return float(self.weight_sums[i])

    @classmethod
    def empty(cls, n_users):
        """No neighbors at all; makes the cluster regularizer vanish."""
        return cls(
            sp.csr_matrix((n_users, n_users)),
            np.arange(n_users),
        )


def _cluster_similarities(ratings_csr, members):
    """Dense Sim block for one cluster, computed blockwise.

    Yields (row_members, sim_block) where sim_block has one row per user
    in row_members and one column per cluster member.
    """
    a = ratings_csr[members]
    sq = a.copy()
    sq.data = sq.data ** 2
    mask = a.copy()
    mask.data = np.ones_like(mask.data)
    for start in range(0, len(members), _BLOCK):
        rows = slice(start, start + _BLOCK)
        num = np.asarray((a[rows] @ a.T).todense())
        # sum of squared ratings over the co-rated subset, both directions
        p_row = np.asarray((sq[rows] @ mask.T).todense())
        p_col = np.asarray((mask[rows] @ sq.T).todense())
        denom = np.sqrt(p_row * p_col)
        with np.errstate(invalid="ignore", divide="ignore"):
            sim = np.where(denom > 0, num / denom, 0.0)
        np.clip(sim, 0.0, 1.0, out=sim)
        yield members[rows], sim


def build_neighbor_weights(assignment: ClusterAssignment,
                           train: RatingDataset) -> NeighborWeights:
    """Compute VSS weights between every same-cluster user pair.

    Uses sparse matrix products per cluster, so each symmetric pair is
    evaluated once per direction with identical results.
    """
    n = train.n_users
    if len(assignment.labels) != n:
        raise ValueError("assignment does not cover the dataset's users")
    csr = train.to_csr()
    rows_out, cols_out, vals_out = [], [], []
    for p in range(assignment.k):
        members = assignment.members(p)
        if len(members) < 2:
            continue
        for row_members, sim in _cluster_similarities(csr, members):
            r, c = np.nonzero(sim)
            keep = row_members[r] != members[c]  # no self loops
            rows_out.append(row_members[r][keep])
            cols_out.append(members[c][keep])
            vals_out.append(sim[r, c][keep])
    if rows_out:
        matrix = sp.csr_matrix(
            (np.concatenate(vals_out),
             (np.concatenate(rows_out), np.concatenate(cols_out))),
            shape=(n, n),
        )
        # exact symmetry regardless of float summation order
        matrix = (matrix + matrix.T) * 0.5
    else:
        matrix = sp.csr_matrix((n, n))
    return NeighborWeights(matrix, assignment.labels)
