import csv

import numpy as np
import pytest

from conftest import DELTA
from deconflict.evaluation import CSV_FIELDS, build_pool, evaluate_policies, parse_policy, recount
from deconflict.learning import SequenceClassifier, init_params

RATIOS = (0.5, 0.95, 1.15)


@pytest.fixture(scope="module")
def pool(model):
    return build_pool(12, model, DELTA, seed=3)


@pytest.fixture(scope="module")
def classifier():
    # untrained weights are enough to exercise the plumbing
    params = init_params(3, 8, np.random.default_rng(0))
    return SequenceClassifier(params, np.zeros(3), np.ones(3), 40)


@pytest.fixture(scope="module")
def report(model, pool, classifier):
    policies = ["random", "greedy", "greedy+repair", "learned", "oracle", "milp"]
    return evaluate_policies(pool, policies, model, DELTA, RATIOS, classifier, seed=1)


def test_parse_policy():
    assert parse_policy("greedy") == ("greedy", False)
    assert parse_policy("learned+repair") == ("learned", True)
    for bad in ("oracle+repair", "milp+repair", "greedy+fast", "best"):
        with pytest.raises(ValueError):
            parse_policy(bad)


def test_pool_is_centrally_feasible(model, pool):
    assert len(pool) == 12
    assert all(len(sc.uas) == 2 for sc in pool)


def test_summary_rows(report):
    rows = report.summary()
    assert len(rows) == 6 * len(RATIOS)
    for r in rows:
        assert 0.0 <= r["separation_rate"] <= 1.0
        assert r["failure_rate"] == pytest.approx(1.0 - r["separation_rate"])
        assert r["mean_ms"] >= 0 and r["std_ms"] >= 0
        assert r["conflicts_before"] > 0


def test_central_columns_separate_everything(report):
    for ratio in RATIOS:
        assert report.rate("milp", ratio) == 1.0
        assert report.rate("oracle", ratio) == 1.0


def test_rates_grow_with_tube_size(report):
    for policy in ("greedy", "greedy+repair"):
        rates = [report.rate(policy, r) for r in RATIOS]
        assert rates == sorted(rates)
    assert report.rate("greedy+repair", 0.5) >= report.rate("greedy", 0.5)


def test_learned_needs_a_classifier(model, pool):
    with pytest.raises(ValueError):
        evaluate_policies(pool[:1], ["learned"], model, DELTA, [0.5])
    with pytest.raises(ValueError):
        evaluate_policies([], ["greedy"], model, DELTA, [0.5])


def test_csv_and_recount(tmp_path, report):
    report.to_csv(tmp_path / "e.csv")
    with open(tmp_path / "e.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert tuple(rows[0]) == CSV_FIELDS
    assert len(rows) == 18
    report.write_records(tmp_path / "r.jsonl")
    counted = recount(tmp_path / "r.jsonl")
    for row in report.summary():
        assert counted[(row["policy"], row["rho_over_delta"])] == row["separation_rate"]


def test_random_policy_seeds_per_instance(model, pool):
    a = evaluate_policies(pool[:4], ["random"], model, DELTA, [0.5], seed=5)
    b = evaluate_policies(pool[:4], ["random"], model, DELTA, [0.5], seed=5)
    assert [r.separated for r in a.records] == [r.separated for r in b.records]
