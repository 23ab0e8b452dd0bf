import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ucmf import SweepSpec, derive_seed, mae, rmse, run_experiment, sweep
from ucmf.evaluation import ExperimentConfig, MODELS, run_single
from ucmf.factorization import TrainingConfig
from ucmf.ingest import SplitSpec, split

from conftest import make_tags, random_dataset


def naive_mae(p, t):
    return sum(abs(a - b) for a, b in zip(t, p)) / len(p)


def naive_rmse(p, t):
    return math.sqrt(sum((a - b) ** 2 for a, b in zip(t, p)) / len(p))


@pytest.fixture
def small_problem():
    rng = np.random.default_rng(42)
    ds = random_dataset(rng, 12, 10, density=0.7)
    tags = make_tags([{j % 4} for j in range(10)], n_tags=4)
    config = ExperimentConfig(
        training=TrainingConfig(n_factors=3, epochs=5),
        k=2,
    )
    return ds, tags, config


class TestMetrics:
    def test_perfect_predictions(self):
        assert mae([1.0, 2.0], [1.0, 2.0]) == 0.0
        assert rmse([1.0, 2.0], [1.0, 2.0]) == 0.0

    def test_constant_offset(self):
        truths = [1.0, 2.0, 3.0]
        preds = [2.0, 3.0, 4.0]
        assert mae(preds, truths) == pytest.approx(1.0)
        assert rmse(preds, truths) == pytest.approx(1.0)

    def test_hand_values(self):
        assert mae([4.0, 3.0], [5.0, 1.0]) == pytest.approx(1.5)
        assert rmse([4.0, 3.0], [5.0, 1.0]) == pytest.approx(math.sqrt(2.5))

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            mae([], [])
        with pytest.raises(ValueError):
            rmse([], [])

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValueError):
            mae([1.0], [1.0, 2.0])

    @given(st.lists(st.tuples(st.floats(1, 5), st.floats(1, 5)),
                    min_size=1, max_size=50))
    @settings(max_examples=50, deadline=None)
    def test_oracle_equivalence_and_power_mean(self, pairs):
        preds = [p for p, _ in pairs]
        truths = [t for _, t in pairs]
        assert mae(preds, truths) == pytest.approx(naive_mae(preds, truths), abs=1e-12)
        assert rmse(preds, truths) == pytest.approx(naive_rmse(preds, truths), abs=1e-12)
        assert rmse(preds, truths) >= mae(preds, truths) - 1e-12


class TestDeriveSeed:
    def test_stable(self):
        assert derive_seed(1, "0.9", 3) == derive_seed(1, "0.9", 3)

    def test_distinct_inputs_distinct_seeds(self):
        seeds = {derive_seed(0, f"{f:g}", r)
                 for f in (0.9, 0.8, 0.7) for r in range(10)}
        assert len(seeds) == 30

    def test_range(self):
        s = derive_seed(123, "x", 7)
        assert 0 <= s < 2 ** 63


class TestSweepSpec:
    def test_validation(self):
        with pytest.raises(ValueError):
            SweepSpec("gamma", (1, 2))
        with pytest.raises(ValueError):
            SweepSpec("alpha", ())
        with pytest.raises(ValueError):
            SweepSpec("alpha", (0.1, 0.01))
        with pytest.raises(ValueError):
            SweepSpec("k", (2, 2, 3))
        SweepSpec("k", (2, 3, 5))


class TestRunExperiment:
    def test_report_structure(self, small_problem):
        ds, tags, config = small_problem
        report = run_experiment(ds, tags, fractions=(0.8,), runs=2,
                                base_seed=0, config=config)
        assert len(report.rows) == 2 * len(MODELS)
        for row in report.rows:
            assert row.model in MODELS
            assert row.s > 0
            assert row.rmse >= row.mae - 1e-12

    def test_s_equals_test_size(self, small_problem):
        ds, tags, config = small_problem
        report = run_experiment(ds, tags, fractions=(0.8,), runs=1,
                                base_seed=5, config=config)
        seed = derive_seed(5, "0.8", 0)
        _, test = split(ds, SplitSpec(0.8, seed=seed))
        assert all(row.s == len(test) for row in report.rows)

    def test_aggregates_match_rows(self, small_problem):
        ds, tags, config = small_problem
        report = run_experiment(ds, tags, fractions=(0.8,), runs=3,
                                base_seed=1, config=config)
        for model in MODELS:
            rows = [r for r in report.rows if r.model == model]
            mean, std, _, _ = report.summary()[(0.8, model)]
            assert mean == pytest.approx(np.mean([r.mae for r in rows]))
            assert std == pytest.approx(np.std([r.mae for r in rows]))

    def test_deterministic(self, small_problem):
        ds, tags, config = small_problem
        a = run_experiment(ds, tags, fractions=(0.8,), runs=2, base_seed=2,
                           config=config)
        b = run_experiment(ds, tags, fractions=(0.8,), runs=2, base_seed=2,
                           config=config)
        assert [(r.model, r.mae, r.rmse) for r in a.rows] == \
            [(r.model, r.mae, r.rmse) for r in b.rows]

    def test_parallel_matches_serial(self, small_problem):
        ds, tags, config = small_problem
        serial = run_experiment(ds, tags, fractions=(0.8,), runs=2,
                                base_seed=3, config=config, threads=1)
        parallel = run_experiment(ds, tags, fractions=(0.8,), runs=2,
                                  base_seed=3, config=config, threads=2)
        assert [(r.model, r.mae, r.rmse) for r in serial.rows] == \
            [(r.model, r.mae, r.rmse) for r in parallel.rows]

    def test_runs_validation(self, small_problem):
        ds, tags, config = small_problem
        with pytest.raises(ValueError):
            run_experiment(ds, tags, runs=0, config=config)

    def test_failure_carries_provenance(self, small_problem):
        ds, tags, _ = small_problem
        bad = ExperimentConfig(training=TrainingConfig(eta=100.0, epochs=20), k=2)
        with pytest.raises(RuntimeError, match="fraction=0.8"):
            run_experiment(ds, tags, fractions=(0.8,), runs=1, config=bad)

    def test_csv_output(self, small_problem, tmp_path):
        ds, tags, config = small_problem
        report = run_experiment(ds, tags, fractions=(0.8,), runs=2,
                                base_seed=0, config=config)
        runs_path = tmp_path / "runs.csv"
        summary_path = tmp_path / "summary.csv"
        report.write_runs_csv(runs_path)
        report.write_summary_csv(summary_path)
        with open(runs_path) as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["fraction", "run", "model", "metric", "value"]
        assert len(rows) == 1 + 2 * len(MODELS) * 2  # MAE and RMSE per run row
        assert all(len(r[4].split(".")[1]) == 5 for r in rows[1:])
        with open(summary_path) as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["fraction", "model", "metric", "mean", "stddev"]
        assert len(rows) == 1 + 2 * len(MODELS)


class TestSweep:
    def test_partitions_identical_across_values(self, small_problem):
        ds, tags, config = small_problem
        # the split depends only on (base_seed, fraction, run)
        seed = derive_seed(9, "0.8", 0)
        t1, _ = split(ds, SplitSpec(0.8, seed=seed))
        t2, _ = split(ds, SplitSpec(0.8, seed=seed))
        assert np.array_equal(t1.users, t2.users)

    def test_single_value_matches_direct_run(self, small_problem):
        ds, tags, config = small_problem
        rows = sweep(ds, tags, SweepSpec("alpha", (0.001,)), fraction=0.8,
                     runs=2, base_seed=4, config=config)
        assert len(rows) == 1
        direct = []
        for run in range(2):
            cell, _ = run_single(ds, tags, 0.8, run, 4, config, models=("UCMF",))
            direct.append(cell[0].mae)
        assert rows[0][1] == pytest.approx(np.mean(direct))

    def test_k_sweep_runs(self, small_problem):
        ds, tags, config = small_problem
        rows = sweep(ds, tags, SweepSpec("k", (2, 3)), fraction=0.8,
                     runs=1, base_seed=0, config=config)
        assert [r[0] for r in rows] == [2, 3]
        assert all(np.isfinite(r[1]) and np.isfinite(r[2]) for r in rows)
