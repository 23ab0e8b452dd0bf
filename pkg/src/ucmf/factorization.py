"""Rating predictors: mean baselines and SGD-trained factor models.

The factor models approximate the rating matrix by U^T V with U of shape
(n_factors, n_users) and V of shape (n_factors, n_items). The
cluster-regularized variant adds a penalty pulling each user's factor
vector toward similarity-weighted cluster co-members; with a zero weight
it reduces exactly (bitwise) to the plain regularized model.

``objective`` and ``gradient`` evaluate the full-batch loss and its
analytic gradient for verification against independent oracles.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator

from ucmf._sgd import sgd_epoch
from ucmf.ingest import RatingDataset
from ucmf.similarity import NeighborWeights


class TrainingDivergedError(RuntimeError):
    """Raised when factors become non-finite during training."""

    def __init__(self, epoch):
        self.epoch = epoch
        super().__init__(f"training diverged at epoch {epoch} (non-finite factors)")


@dataclass(frozen=True)
class TrainingConfig:
    """Hyperparameters for the SGD factor models."""

    n_factors: int = 10
    lambda1: float = 0.01
    lambda2: float = 0.01
    alpha: float = 0.001
    eta: float = 0.005
    epochs: int = 50
    init_scale: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.n_factors < 1:
            raise ValueError("n_factors must be at least 1")
        if self.lambda1 < 0 or self.lambda2 < 0 or self.alpha < 0:
            raise ValueError("regularization weights must be non-negative")
        if self.eta <= 0:
            raise ValueError("eta must be positive")
        if self.epochs < 0:
            raise ValueError("epochs must be non-negative")
        if self.init_scale <= 0:
            raise ValueError("init_scale must be positive")


def objective(U, V, train: RatingDataset, weights: NeighborWeights | None = None,
              lambda1: float = 0.0, lambda2: float = 0.0, alpha: float = 0.0) -> float:
    """Full loss: half squared error over observed ratings, the
    similarity-weighted penalty on same-cluster user-factor differences,
    and Frobenius penalties on U and V."""
    pred = np.einsum("li,li->i", U[:, train.users], V[:, train.items])
    value = 0.5 * float(((pred - train.ratings) ** 2).sum())
    value += 0.5 * lambda1 * float((U ** 2).sum())
    value += 0.5 * lambda2 * float((V ** 2).sum())
    if alpha != 0.0 and weights is not None:
        w = weights.matrix
        # sum_i sum_f w_if ||U_i - U_f||^2 = 2 sum_i W_i ||U_i||^2 - 2 tr(U W U^T)
        norms = (U ** 2).sum(axis=0)
        cross = float(np.sum(U * (w @ U.T).T))
        value += 0.5 * alpha * (2.0 * float(weights.weight_sums @ norms) - 2.0 * cross)
    return value


def gradient(U, V, train: RatingDataset, weights: NeighborWeights | None = None,
             lambda1: float = 0.0, lambda2: float = 0.0, alpha: float = 0.0):
    """Full-batch analytic gradient of :func:`objective` -> (dU, dV).

    The cluster term contributes 2*alpha*sum_f Sim(i,f)(U_i - U_f) to
    each user row (both halves of the symmetric penalty).
    """
    n_factors = U.shape[0]
    pred = np.einsum("li,li->i", U[:, train.users], V[:, train.items])
    err = pred - train.ratings
    dU = lambda1 * U
    dV = lambda2 * V
    dU_t = np.zeros((U.shape[1], n_factors))
    np.add.at(dU_t, train.users, err[:, None] * V[:, train.items].T)
    dU += dU_t.T
    dV_t = np.zeros((V.shape[1], n_factors))
    np.add.at(dV_t, train.items, err[:, None] * U[:, train.users].T)
    dV += dV_t.T
    if alpha != 0.0 and weights is not None:
        neighbor_sums = (weights.matrix @ U.T).T
        dU += 2.0 * alpha * (U * weights.weight_sums[None, :] - neighbor_sums)
    return dU, dV


class MeanBaseline(BaseEstimator):
    """Per-user or per-item mean predictor with a global-mean fallback."""

    def __init__(self, kind="user"):
        self.kind = kind

    def fit(self, train: RatingDataset, y=None):
        if self.kind not in ("user", "item"):
            raise ValueError(f"kind must be 'user' or 'item', got {self.kind!r}")
        if len(train) == 0:
            raise ValueError("cannot fit a baseline on an empty training set")
        self.global_mean_ = float(train.ratings.mean())
        if self.kind == "user":
            idx, n = train.users, train.n_users
        else:
            idx, n = train.items, train.n_items
        counts = np.bincount(idx, minlength=n)
        sums = np.bincount(idx, weights=train.ratings, minlength=n)
        self.means_ = np.where(counts > 0, sums / np.maximum(counts, 1),
                               self.global_mean_)
        return self

    def predict(self, users, items):
        users = np.asarray(users)
        items = np.asarray(items)
        idx = users if self.kind == "user" else items
        return self.means_[idx]


class ClusterRegularizedMF(BaseEstimator):
    """Factor model trained by per-observation SGD with a cluster pull.

    fit(train, neighbor_weights) shuffles the observations each epoch and
    applies, per observed rating, the local residual update plus the
    user's cluster-regularization term (neighbor sums refreshed once per
    epoch). Fitted attributes: ``U_`` (n_factors x n_users), ``V_``
    (n_factors x n_items), ``global_mean_``, ``loss_history_``.
    """

    def __init__(self, n_factors=10, lambda1=0.01, lambda2=0.01, alpha=0.001,
                 eta=0.005, epochs=50, init_scale=0.1, seed=0):
        self.n_factors = n_factors
        self.lambda1 = lambda1
        self.lambda2 = lambda2
        self.alpha = alpha
        self.eta = eta
        self.epochs = epochs
        self.init_scale = init_scale
        self.seed = seed

    def _config(self):
        return TrainingConfig(
            n_factors=self.n_factors, lambda1=self.lambda1, lambda2=self.lambda2,
            alpha=self.alpha, eta=self.eta, epochs=self.epochs,
            init_scale=self.init_scale, seed=self.seed,
        )

    def fit(self, train: RatingDataset, neighbor_weights: NeighborWeights | None = None):
        cfg = self._config()
        if len(train) == 0:
            raise ValueError("cannot fit on an empty training set")
        alpha = cfg.alpha
        if neighbor_weights is None:
            if alpha != 0.0:
                raise ValueError("alpha > 0 requires neighbor weights")
            neighbor_weights = NeighborWeights.empty(train.n_users)
        rng = np.random.default_rng(cfg.seed)
        U = rng.uniform(0.0, cfg.init_scale, size=(cfg.n_factors, train.n_users))
        V = rng.uniform(0.0, cfg.init_scale, size=(cfg.n_factors, train.n_items))
        w_matrix = neighbor_weights.matrix
        weight_sums = neighbor_weights.weight_sums
        user_counts = train.user_counts()
        # users with no observations never appear in the SGD sweep; they
        # still receive their pure regularization gradient once per epoch
        # so the cluster pull reaches them
        unrated = np.flatnonzero(user_counts == 0)
        loss_history = []
        for epoch in range(cfg.epochs):
            order = rng.permutation(len(train))
            neighbor_sums = np.asarray((w_matrix @ U.T).T, order="C")
            sgd_epoch(train.users, train.items, train.ratings, order, U, V,
                      cfg.lambda1, cfg.lambda2, 2.0 * alpha,
                      weight_sums, neighbor_sums, cfg.eta)
            if len(unrated):
                U[:, unrated] -= cfg.eta * (
                    cfg.lambda1 * U[:, unrated]
                    + 2.0 * alpha * (U[:, unrated] * weight_sums[unrated]
                                     - neighbor_sums[:, unrated])
                )
            if not (np.isfinite(U).all() and np.isfinite(V).all()):
                raise TrainingDivergedError(epoch)
            loss_history.append(objective(U, V, train, neighbor_weights,
                                          cfg.lambda1, cfg.lambda2, alpha))
        self.U_ = U
        self.V_ = V
        self.global_mean_ = float(train.ratings.mean())
        self.loss_history_ = loss_history
        self.seen_users_ = train.user_counts() > 0
        self.seen_items_ = train.item_counts() > 0
        return self

    def predict(self, users, items):
        """Inner-product predictions; unseen users or items fall back to
        the global training mean. Accepts scalars or arrays."""
        scalar = np.isscalar(users) and np.isscalar(items)
        users = np.atleast_1d(np.asarray(users))
        items = np.atleast_1d(np.asarray(items))
        pred = np.einsum("li,li->i", self.U_[:, users], self.V_[:, items])
        cold = ~(self.seen_users_[users] & self.seen_items_[items])
        pred = np.where(cold, self.global_mean_, pred)
        return float(pred[0]) if scalar else pred


class MatrixFactorization(ClusterRegularizedMF):
    """Plain regularized factor model (cluster pull disabled)."""

    def __init__(self, n_factors=10, lambda1=0.01, lambda2=0.01,
                 eta=0.005, epochs=50, init_scale=0.1, seed=0):
        super().__init__(n_factors=n_factors, lambda1=lambda1, lambda2=lambda2,
                         alpha=0.0, eta=eta, epochs=epochs,
                         init_scale=init_scale, seed=seed)

    def fit(self, train: RatingDataset, neighbor_weights=None):
        return super().fit(train, None)


def train_baseline(train: RatingDataset, kind: str) -> MeanBaseline:
    """Fit a user-mean or item-mean baseline."""
    return MeanBaseline(kind=kind).fit(train)


def train_mf(train: RatingDataset, config: TrainingConfig) -> MatrixFactorization:
    """Fit the plain regularized factor model (alpha forced to 0)."""
    model = MatrixFactorization(
        n_factors=config.n_factors, lambda1=config.lambda1, lambda2=config.lambda2,
        eta=config.eta, epochs=config.epochs,
        init_scale=config.init_scale, seed=config.seed,
    )
    return model.fit(train)


def train_ucmf(train: RatingDataset, weights: NeighborWeights,
               config: TrainingConfig) -> ClusterRegularizedMF:
    """Fit the cluster-regularized factor model."""
    model = ClusterRegularizedMF(
        n_factors=config.n_factors, lambda1=config.lambda1, lambda2=config.lambda2,
        alpha=config.alpha, eta=config.eta, epochs=config.epochs,
        init_scale=config.init_scale, seed=config.seed,
    )
    return model.fit(train, weights)


def save_model(model: ClusterRegularizedMF, path) -> None:
    """Dump a fitted factor model; round-trips bit-exactly."""
    np.savez(
        Path(path),
        U=model.U_, V=model.V_,
        global_mean=np.float64(model.global_mean_),
        seen_users=model.seen_users_, seen_items=model.seen_items_,
        params=np.array(json.dumps(model.get_params())),
    )


def load_model(path) -> ClusterRegularizedMF:
    with np.load(Path(path)) as data:
        params = json.loads(str(data["params"]))
        model = ClusterRegularizedMF(**params) if "alpha" in params \
            else MatrixFactorization(**params)
        model.U_ = data["U"]
        model.V_ = data["V"]
        model.global_mean_ = float(data["global_mean"])
        model.seen_users_ = data["seen_users"]
        model.seen_items_ = data["seen_items"]
    return model
