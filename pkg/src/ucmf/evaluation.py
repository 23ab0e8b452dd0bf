"""MAE/RMSE metrics, the four-model comparison protocol, and sweeps.

The comparison protocol runs, for each train fraction and seeded run:
split -> fit user-mean, item-mean, plain MF, and the cluster-regularized
model (clustering and similarity weights rebuilt from that train split)
-> evaluate all four on the held-out ratings with predictions clamped to
the 1-5 star range. Sweeps rerun only the cluster-regularized model over
a grid of one parameter with identical splits across grid values.
"""

from __future__ import annotations

import csv
import hashlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ucmf.clustering import ClusteringConfig, build_interest_matrix, kmeans
from ucmf.factorization import TrainingConfig, train_baseline, train_mf, train_ucmf
from ucmf.ingest import RatingDataset, SplitSpec, TagCatalog, split
from ucmf.similarity import build_neighbor_weights

RATING_MIN = 1.0
RATING_MAX = 5.0

MODELS = ("UM", "IM", "MF", "UCMF")


def mae(predictions, truths) -> float:
    """Mean absolute error; inputs must be equal-length and nonempty."""
    predictions = np.asarray(predictions, dtype=np.float64)
    truths = np.asarray(truths, dtype=np.float64)
    if predictions.shape != truths.shape:
        raise ValueError("predictions and truths must have the same shape")
    if predictions.size == 0:
        raise ValueError("cannot compute MAE of empty input")
    return float(np.abs(truths - predictions).mean())


def rmse(predictions, truths) -> float:
    """Root mean square error; inputs must be equal-length and nonempty."""
    predictions = np.asarray(predictions, dtype=np.float64)
    truths = np.asarray(truths, dtype=np.float64)
    if predictions.shape != truths.shape:
        raise ValueError("predictions and truths must have the same shape")
    if predictions.size == 0:
        raise ValueError("cannot compute RMSE of empty input")
    return float(np.sqrt(((truths - predictions) ** 2).mean()))


def derive_seed(base_seed, *parts) -> int:
    """Stable 63-bit seed from a base seed and arbitrary labels, so any
    single run is reproducible in isolation."""
    text = repr((int(base_seed),) + tuple(parts)).encode()
    digest = hashlib.blake2b(text, digest_size=8).digest()
    return int.from_bytes(digest, "big") & (2 ** 63 - 1)


@dataclass(frozen=True)
class SweepSpec:
    """One swept parameter ('alpha' or 'k') and its ordered grid."""

    parameter: str
    values: tuple

    def __post_init__(self):
        if self.parameter not in ("alpha", "k"):
            raise ValueError(f"unknown sweep parameter {self.parameter!r}")
        if len(self.values) == 0:
            raise ValueError("sweep grid must be non-empty")
        if list(self.values) != sorted(self.values):
            raise ValueError("sweep grid must be strictly increasing")
        if len(set(self.values)) != len(self.values):
            raise ValueError("sweep grid must not repeat values")


@dataclass
class RunRow:
    fraction: float
    run: int
    model: str
    s: int
    mae: float
    rmse: float


@dataclass
class EvaluationReport:
    """Per-run rows plus (fraction, model) aggregates.

    ``summary()`` returns {(fraction, model): (mae_mean, mae_std,
    rmse_mean, rmse_std)} with population standard deviations.
    """

    rows: list = field(default_factory=list)

    def summary(self):
        out = {}
        groups = {}
        for row in self.rows:
            groups.setdefault((row.fraction, row.model), []).append(row)
        for key in sorted(groups, key=lambda k: (-k[0], MODELS.index(k[1]))):
            rows = groups[key]
            maes = np.array([r.mae for r in rows])
            rmses = np.array([r.rmse for r in rows])
            out[key] = (maes.mean(), maes.std(), rmses.mean(), rmses.std())
        return out

    def mean(self, fraction, model, metric="mae"):
        stats = self.summary()[(fraction, model)]
        return stats[0] if metric == "mae" else stats[2]

    def write_runs_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["fraction", "run", "model", "metric", "value"])
            for row in self.rows:
                writer.writerow([f"{row.fraction:g}", row.run, row.model,
                                 "MAE", f"{row.mae:.5f}"])
                writer.writerow([f"{row.fraction:g}", row.run, row.model,
                                 "RMSE", f"{row.rmse:.5f}"])

    def write_summary_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["fraction", "model", "metric", "mean", "stddev"])
            for (fraction, model), (m_mean, m_std, r_mean, r_std) in self.summary().items():
                writer.writerow([f"{fraction:g}", model, "MAE",
                                 f"{m_mean:.5f}", f"{m_std:.5f}"])
                writer.writerow([f"{fraction:g}", model, "RMSE",
                                 f"{r_mean:.5f}", f"{r_std:.5f}"])

    def format_summary(self):
        lines = ["fraction  model  MAE      (std)     RMSE     (std)"]
        for (fraction, model), (m_mean, m_std, r_mean, r_std) in self.summary().items():
            lines.append(
                f"{fraction:<8g}  {model:<5}  {m_mean:.5f}  {m_std:.5f}   "
                f"{r_mean:.5f}  {r_std:.5f}"
            )
        return "\n".join(lines)


def clamp(predictions):
    """Clip raw predictions to the 1-5 star range (evaluation time only)."""
    return np.clip(predictions, RATING_MIN, RATING_MAX)


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything a single run needs besides the data."""

    training: TrainingConfig = field(default_factory=TrainingConfig)
    k: int = 5
    theta0: float = 1e-6
    kmeans_max_iterations: int = 300


def run_single(dataset: RatingDataset, tags: TagCatalog, fraction: float,
               run: int, base_seed: int, config: ExperimentConfig,
               models=MODELS):
    """Execute one (fraction, run) cell: split, fit the requested models,
    evaluate on the held-out ratings. Returns (rows, artifacts) where
    artifacts keeps the split seed and cluster assignment for diagnostics.
    """
    seed = derive_seed(base_seed, f"{fraction:g}", run)
    train, test = split(dataset, SplitSpec(train_fraction=fraction, seed=seed))
    truths = test.ratings
    rows = []
    artifacts = {"seed": seed}

    def evaluate(name, model):
        preds = clamp(model.predict(test.users, test.items))
        rows.append(RunRow(fraction, run, name, len(test),
                           mae(preds, truths), rmse(preds, truths)))

    try:
        if "UM" in models:
            evaluate("UM", train_baseline(train, "user"))
        if "IM" in models:
            evaluate("IM", train_baseline(train, "item"))
        training = TrainingConfig(**{**config.training.__dict__,
                                     "seed": derive_seed(seed, "sgd")})
        if "MF" in models:
            evaluate("MF", train_mf(train, training))
        if "UCMF" in models:
            interest = build_interest_matrix(train, tags)
            assignment = kmeans(interest, ClusteringConfig(
                k=config.k, theta0=config.theta0,
                max_iterations=config.kmeans_max_iterations,
                seed=derive_seed(seed, "kmeans"),
            ))
            weights = build_neighbor_weights(assignment, train)
            artifacts["assignment"] = assignment
            evaluate("UCMF", train_ucmf(train, weights, training))
    except Exception as exc:
        raise RuntimeError(
            f"run failed (fraction={fraction:g}, run={run}, "
            f"after models {[r.model for r in rows]}): {exc}"
        ) from exc
    return rows, artifacts


def _run_cell(args):
    dataset, tags, fraction, run, base_seed, config = args
    rows, _ = run_single(dataset, tags, fraction, run, base_seed, config)
    return (fraction, run), rows


def _run_ucmf_cell(args):
    dataset, tags, fraction, run, base_seed, config = args
    rows, _ = run_single(dataset, tags, fraction, run, base_seed, config,
                         models=("UCMF",))
    return (fraction, run), rows


def run_experiment(dataset: RatingDataset, tags: TagCatalog,
                   fractions=(0.9, 0.8, 0.7), runs: int = 10,
                   base_seed: int = 0,
                   config: ExperimentConfig | None = None,
                   threads: int = 1) -> EvaluationReport:
    """Full comparison protocol: every fraction x run x model.

    Runs are independent; with threads > 1 they execute in parallel
    processes and are merged in deterministic (fraction, run) order.
    """
    if runs < 1:
        raise ValueError("runs must be at least 1")
    config = config or ExperimentConfig()
    cells = [(fraction, run) for fraction in fractions for run in range(runs)]
    results = {}
    if threads > 1:
        jobs = [(dataset, tags, f, r, base_seed, config) for f, r in cells]
        with ProcessPoolExecutor(max_workers=threads) as pool:
            for key, rows in pool.map(_run_cell, jobs):
                results[key] = rows
    else:
        for fraction, run in cells:
            rows, _ = run_single(dataset, tags, fraction, run, base_seed, config)
            results[(fraction, run)] = rows
    report = EvaluationReport()
    for key in cells:
        report.rows.extend(results[key])
    return report


def sweep(dataset: RatingDataset, tags: TagCatalog, spec: SweepSpec,
          fraction: float = 0.9, runs: int = 10, base_seed: int = 0,
          config: ExperimentConfig | None = None, threads: int = 1):
    """Train/evaluate the cluster-regularized model once per grid value.

    Seeds depend only on (base_seed, fraction, run), so partitions are
    identical across grid values and only the swept parameter varies.
    Returns a list of (value, mean MAE, mean RMSE).
    """
    config = config or ExperimentConfig()
    out = []
    for value in spec.values:
        if spec.parameter == "alpha":
            cfg = ExperimentConfig(
                training=TrainingConfig(**{**config.training.__dict__,
                                           "alpha": float(value)}),
                k=config.k, theta0=config.theta0,
                kmeans_max_iterations=config.kmeans_max_iterations,
            )
        else:
            cfg = ExperimentConfig(
                training=config.training, k=int(value), theta0=config.theta0,
                kmeans_max_iterations=config.kmeans_max_iterations,
            )
        if threads > 1:
            jobs = [(dataset, tags, fraction, run, base_seed, cfg)
                    for run in range(runs)]
            with ProcessPoolExecutor(max_workers=threads) as pool:
                cell_rows = [rows for _, rows in pool.map(_run_ucmf_cell, jobs)]
        else:
            cell_rows = [run_single(dataset, tags, fraction, run, base_seed, cfg,
                                    models=("UCMF",))[0]
                         for run in range(runs)]
        maes = [rows[0].mae for rows in cell_rows]
        rmses = [rows[0].rmse for rows in cell_rows]
        out.append((value, float(np.mean(maes)), float(np.mean(rmses))))
    return out


def write_sweep_csv(rows, parameter, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["parameter", "value", "mae_mean", "rmse_mean"])
        for value, mae_mean, rmse_mean in rows:
            writer.writerow([parameter, f"{value:g}",
                             f"{mae_mean:.5f}", f"{rmse_mean:.5f}"])
