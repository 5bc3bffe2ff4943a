import json
import math

import pytest

import maxroam


def test_partition_roundtrip_and_plan():
    lp = maxroam.init_partition(10, 2, 0.6, seed=3, mode="exact")
    assert [lp.active_count(t) for t in range(2)] == [6, 6]
    sel = maxroam.Selector.uniform(3)
    rounds = 0
    while not lp.complete():
        lp.advance(sel)
        rounds += 1
    assert rounds == 4
    assert maxroam.update_ratio(lp, 0.6) == pytest.approx(1.0)
    lp.check_invariants()
    back = maxroam.LayerPartition.from_json(lp.to_json())
    assert back == lp


def test_update_step_and_cosine_weights():
    lp = maxroam.LayerPartition.from_masks([[1, 1, 1, 0], [0, 0, 1, 1]])
    w = [[1.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]]
    swap = lp.apply_update_step(0, maxroam.Selector.cosine(), w)
    assert swap == (2, 3)
    assert lp.apply_update_step(0, maxroam.Selector.cosine(), w) is None
    with pytest.raises(ValueError):
        lp.apply_update_step(1, maxroam.Selector.cosine())


def test_scalar_functions():
    assert maxroam.visit_probability(0.6, 0.5) == pytest.approx(0.8)
    assert maxroam.cosine_similarity([1, 1], [1, 0]) == pytest.approx(1 / math.sqrt(2))
    assert maxroam.plan_steps(20, 0.7) == 6
    layers = [maxroam.init_partition(10, 2, 0.6, seed=0)]
    assert maxroam.plan_duration(layers, 0.6, 1.0) == pytest.approx(4.0)
    with pytest.raises(maxroam.ConfigError):
        maxroam.init_partition(0, 2, 0.5)


def test_run_experiment_is_deterministic():
    cfg = {
        "mode": "mr", "p": 0.5, "epochs": 2, "widths": [8, 8], "seeds": [0],
        "optimizer": {"learning_rate": 1e-3},
        "data": {"n_tasks": 2, "n_train": 32, "n_val": 16, "kind": "binary", "relatedness": -0.3},
    }
    a = maxroam.run_experiment(cfg)
    b = maxroam.run_experiment(json.dumps(cfg))
    assert a["metric"] == "fscore"
    assert a["metrics_csv"] == b["metrics_csv"]
    assert a["metrics_csv"].startswith("# maxroam-metrics v1")


def test_verify_and_generate():
    report = maxroam.verify(size=10, tasks=2, sharing=[0.6], runs=10000)
    assert report["passed"]
    data = maxroam.generate({"n_tasks": 3, "relatedness": 0.5, "n_train": 20, "n_val": 10})
    x, targets = data["train"]
    assert x.shape == (20, 16)
    assert len(targets) == 3
