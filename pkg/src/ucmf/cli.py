"""Command-line front end: ``ucmf inspect | evaluate | sweep``.

Configuration comes from an optional ``key = value`` file (``#``
comments) overridden by flags. Every evaluate/sweep invocation writes a
MANIFEST with the fully resolved configuration into the output
directory, so reruns are reproducible and overwrite deterministically.

Exit codes: 0 success, 1 validation error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
from pathlib import Path

from ucmf.clustering import ClusteringConfig, build_interest_matrix, kmeans
from ucmf.evaluation import (
    ExperimentConfig,
    SweepSpec,
    derive_seed,
    run_experiment,
    sweep,
    write_sweep_csv,
)
from ucmf.factorization import TrainingConfig, save_model
from ucmf.ingest import ParseError, parse_movies, parse_ratings, split, SplitSpec
from ucmf.similarity import build_neighbor_weights

DEFAULT_ALPHA_GRID = (1e-5, 1e-4, 1e-3, 1e-2, 1e-1)
DEFAULT_K_GRID = (2, 3, 5, 8, 12)

DEFAULTS = {
    "ratings": None,
    "movies": None,
    "out": "ucmf-out",
    "seed": 0,
    "threads": os.cpu_count() or 1,
    "fractions": (0.9, 0.8, 0.7),
    "runs": 10,
    "n_factors": 10,
    "lambda1": 0.01,
    "lambda2": 0.01,
    "alpha": 0.001,
    "eta": 0.005,
    "epochs": 50,
    "init_scale": 0.1,
    "k": 5,
    "theta0": 1e-6,
    "kmeans_max_iterations": 300,
    "alpha_grid": DEFAULT_ALPHA_GRID,
    "k_grid": DEFAULT_K_GRID,
}

_INT_KEYS = {"seed", "threads", "runs", "n_factors", "epochs", "k",
             "kmeans_max_iterations"}
_FLOAT_KEYS = {"lambda1", "lambda2", "alpha", "eta", "init_scale", "theta0"}
_LIST_KEYS = {"fractions", "alpha_grid", "k_grid"}


class ConfigError(ValueError):
    pass


def _parse_number_list(text, integer=False):
    parts = [p for p in text.replace(",", " ").split() if p]
    return tuple(int(p) if integer else float(p) for p in parts)


def read_config_file(path):
    """Parse a ``key = value`` config file into a dict of typed values."""
    values = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key not in DEFAULTS:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        try:
            if key in _INT_KEYS:
                values[key] = int(value)
            elif key in _FLOAT_KEYS:
                values[key] = float(value)
            elif key in _LIST_KEYS:
                values[key] = _parse_number_list(value, integer=(key == "k_grid"))
            else:
                values[key] = value
        except ValueError:
            raise ConfigError(f"{path}:{lineno}: bad value for {key}: {value!r}") from None
    return values


def resolve_config(args):
    """Merge defaults, config file, and flags (flags win)."""
    cfg = dict(DEFAULTS)
    if args.config:
        cfg.update(read_config_file(args.config))
    for key in ("ratings", "movies", "out", "seed", "threads", "runs"):
        value = getattr(args, key, None)
        if value is not None:
            cfg[key] = value
    if getattr(args, "fractions", None):
        cfg["fractions"] = _parse_number_list(args.fractions)
    return cfg


def validate_config(cfg, need_movies=True):
    if not cfg["ratings"]:
        raise ConfigError("no ratings file given (--ratings or config key 'ratings')")
    if not Path(cfg["ratings"]).exists():
        raise ConfigError(f"ratings file not found: {cfg['ratings']}")
    if need_movies:
        if not cfg["movies"]:
            raise ConfigError("no movies file given (--movies or config key 'movies')")
        if not Path(cfg["movies"]).exists():
            raise ConfigError(f"movies file not found: {cfg['movies']}")
    if cfg["runs"] < 1:
        raise ConfigError("runs must be at least 1")
    if cfg["threads"] < 1:
        raise ConfigError("threads must be at least 1")
    for f in cfg["fractions"]:
        if not 0.0 < f < 1.0:
            raise ConfigError(f"fraction {f} not in (0, 1)")
    # constructing the typed configs validates the numeric fields
    experiment_config(cfg)


def experiment_config(cfg):
    return ExperimentConfig(
        training=TrainingConfig(
            n_factors=cfg["n_factors"], lambda1=cfg["lambda1"],
            lambda2=cfg["lambda2"], alpha=cfg["alpha"], eta=cfg["eta"],
            epochs=cfg["epochs"], init_scale=cfg["init_scale"],
        ),
        k=cfg["k"], theta0=cfg["theta0"],
        kmeans_max_iterations=cfg["kmeans_max_iterations"],
    )


def write_manifest(out_dir, cfg, command, status="ok", extra=()):
    lines = [f"command = {command}", f"status = {status}"]
    for key in sorted(cfg):
        value = cfg[key]
        if isinstance(value, tuple):
            value = ",".join(f"{v:g}" for v in value)
        lines.append(f"{key} = {value}")
    lines.extend(extra)
    (Path(out_dir) / "MANIFEST").write_text("\n".join(lines) + "\n")


def _load_data(cfg, need_movies=True):
    dataset = parse_ratings(cfg["ratings"])
    tags = parse_movies(cfg["movies"], dataset) if need_movies else None
    return dataset, tags


def cmd_inspect(args):
    cfg = resolve_config(args)
    validate_config(cfg, need_movies=cfg["movies"] is not None)
    dataset = parse_ratings(cfg["ratings"])
    print(f"users:   {dataset.n_users}")
    print(f"items:   {dataset.n_items}")
    print(f"ratings: {len(dataset)}")
    if cfg["movies"]:
        tags = parse_movies(cfg["movies"], dataset)
        print(f"tags:    {tags.n_tags}")
        print(f"rated items without tags: {tags.n_items_without_tags}")
        if tags.n_unknown_movies:
            print(f"warning: {tags.n_unknown_movies} movies in "
                  f"{cfg['movies']} were never rated")
    return 0


def _dump_clusters(out_dir, fraction, run, assignment):
    label_path = Path(out_dir) / f"clusters_f{fraction:g}_r{run}.csv"
    with open(label_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["user_index", "cluster_label"])
        for i, label in enumerate(assignment.labels):
            writer.writerow([i, int(label)])
    centroid_path = Path(out_dir) / f"centroids_f{fraction:g}_r{run}.csv"
    with open(centroid_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        for row in assignment.centroids:
            writer.writerow([f"{v:.10g}" for v in row])


def cmd_evaluate(args):
    cfg = resolve_config(args)
    validate_config(cfg)
    out_dir = Path(cfg["out"])
    out_dir.mkdir(parents=True, exist_ok=True)
    dataset, tags = _load_data(cfg)
    config = experiment_config(cfg)
    seeds = [f"seed[{f:g},{r}] = {derive_seed(cfg['seed'], f'{f:g}', r)}"
             for f in cfg["fractions"] for r in range(cfg["runs"])]
    try:
        report = run_experiment(
            dataset, tags, fractions=cfg["fractions"], runs=cfg["runs"],
            base_seed=cfg["seed"], config=config, threads=cfg["threads"],
        )
    except Exception as exc:
        write_manifest(out_dir, cfg, "evaluate", status=f"failed: {exc}",
                       extra=seeds)
        raise
    report.write_runs_csv(out_dir / "runs.csv")
    report.write_summary_csv(out_dir / "summary.csv")
    write_manifest(out_dir, cfg, "evaluate", extra=seeds)
    if args.dump_clusters or args.save_models:
        _dump_run_artifacts(dataset, tags, cfg, config, out_dir,
                            dump_clusters=args.dump_clusters,
                            save_models=args.save_models)
    print(report.format_summary())
    return 0


def _dump_run_artifacts(dataset, tags, cfg, config, out_dir,
                        dump_clusters=False, save_models=False):
    # re-derives the first run of each fraction for diagnostic output
    from ucmf.factorization import train_mf, train_ucmf

    for fraction in cfg["fractions"]:
        seed = derive_seed(cfg["seed"], f"{fraction:g}", 0)
        train, _ = split(dataset, SplitSpec(train_fraction=fraction, seed=seed))
        interest = build_interest_matrix(train, tags)
        assignment = kmeans(interest, ClusteringConfig(
            k=config.k, theta0=config.theta0,
            max_iterations=config.kmeans_max_iterations,
            seed=derive_seed(seed, "kmeans")))
        if dump_clusters:
            _dump_clusters(out_dir, fraction, 0, assignment)
        if save_models:
            training = TrainingConfig(**{**config.training.__dict__,
                                         "seed": derive_seed(seed, "sgd")})
            weights = build_neighbor_weights(assignment, train)
            save_model(train_mf(train, training),
                       out_dir / f"mf_f{fraction:g}_r0.npz")
            save_model(train_ucmf(train, weights, training),
                       out_dir / f"ucmf_f{fraction:g}_r0.npz")


def cmd_sweep(args):
    cfg = resolve_config(args)
    validate_config(cfg)
    if args.grid:
        grid = _parse_number_list(args.grid, integer=(args.param == "k"))
    else:
        grid = cfg["alpha_grid"] if args.param == "alpha" else cfg["k_grid"]
    spec = SweepSpec(parameter=args.param, values=tuple(grid))
    fraction = cfg["fractions"][0]
    out_dir = Path(cfg["out"])
    out_dir.mkdir(parents=True, exist_ok=True)
    dataset, tags = _load_data(cfg)
    try:
        rows = sweep(dataset, tags, spec, fraction=fraction, runs=cfg["runs"],
                     base_seed=cfg["seed"], config=experiment_config(cfg),
                     threads=cfg["threads"])
    except Exception as exc:
        write_manifest(out_dir, cfg, f"sweep {args.param}",
                       status=f"failed: {exc}")
        raise
    write_sweep_csv(rows, args.param, out_dir / "sweep.csv")
    write_manifest(out_dir, cfg, f"sweep {args.param}",
                   extra=[f"grid = {','.join(f'{v:g}' for v in grid)}",
                          f"fraction = {fraction:g}"])
    print(f"{'value':>10}  {'MAE':>8}  {'RMSE':>8}")
    for value, mae_mean, rmse_mean in rows:
        print(f"{value:>10g}  {mae_mean:>8.5f}  {rmse_mean:>8.5f}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="ucmf",
        description="Cluster-regularized matrix factorization experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_shared(p):
        p.add_argument("--config", help="key = value config file")
        p.add_argument("--ratings", help="MovieLens-format ratings file")
        p.add_argument("--movies", help="MovieLens-format movies file")
        p.add_argument("--out", help="output directory")
        p.add_argument("--seed", type=int, help="base seed")
        p.add_argument("--threads", type=int, help="max parallel runs")
        p.add_argument("--runs", type=int, help="runs per fraction")
        p.add_argument("--fractions", help="comma-separated train fractions")

    p_inspect = sub.add_parser("inspect", help="summarize the input files")
    add_shared(p_inspect)
    p_inspect.set_defaults(func=cmd_inspect)

    p_eval = sub.add_parser("evaluate", help="run the four-model comparison")
    add_shared(p_eval)
    p_eval.add_argument("--dump-clusters", action="store_true",
                        help="write cluster label/centroid CSVs (first run)")
    p_eval.add_argument("--save-models", action="store_true",
                        help="save trained factor models (first run)")
    p_eval.set_defaults(func=cmd_evaluate)

    p_sweep = sub.add_parser("sweep", help="sweep alpha or k")
    add_shared(p_sweep)
    p_sweep.add_argument("--param", required=True, choices=("alpha", "k"))
    p_sweep.add_argument("--grid", help="comma-separated grid values")
    p_sweep.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse uses exit code 2 for usage errors; remap to 1
        raise SystemExit(1 if exc.code else 0)
    try:
        return args.func(args)
    except (ConfigError, ParseError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
