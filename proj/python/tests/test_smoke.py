import math

import numpy as np
import pytest

import dnnshield as ds


@pytest.fixture(scope="module")
def fixture_model():
    return ds.train_fixture(200, 11, epochs=5)


def test_cpdn_and_radius():
    assert ds.cpdn([1, 0, 0], [0, 0, 1]) == 2.0
    assert ds.cpdn([0.5, 0.5], [0.5, 0.5]) == 0.0
    assert ds.certified_radius(0.5, 0.5, 1.0) == 0.0
    assert ds.certified_radius(0.841345, 0.158655, 1.0) == pytest.approx(1.0, rel=1e-5)


def test_sr_cap_curve():
    want = 0.8 * (1 - math.exp(-0.3 * 2.0))
    assert ds.sr_cap(2.0, {"lambda": 0.8, "gamma": 0.3}) == pytest.approx(want)
    assert ds.sr_cap(5.0, {"policy": "fixed", "fixed_cap": 0.4}) == 0.4


def test_forward_probs(fixture_model):
    xs, labels = ds.synthetic_dataset(10, 12)
    assert len(xs) == len(labels) == 10
    logits, probs = ds.forward(fixture_model, xs[0])
    assert len(logits) == fixture_model.num_classes
    assert sum(probs) == pytest.approx(1.0, abs=1e-5)
    assert fixture_model.train_accuracy is not None


def test_detect_with_zero_cap_takes_fast_path(fixture_model):
    xs, _ = ds.synthetic_dataset(4, 12)
    table = ds.profile_thresholds(fixture_model, 21)
    cfg = {"t1p": 0.05, "t1": 0.1, "t2": 1.0, "t2p": 1.5, "max_runs": 4,
           "sparsifier": {"lambda": 0.0}}
    for i, x in enumerate(xs):
        v = ds.detect(fixture_model, x, table, cfg, input_id=i)
        assert v["terminated_by"] == "FastPathLow"
        assert v["runs_used"] == 1
        assert v["l1_trace"] == [0.0]


def test_detect_is_deterministic(fixture_model):
    xs, _ = ds.synthetic_dataset(3, 12)
    table = ds.profile_thresholds(fixture_model, 21)
    cfg = {"t1p": 0.0, "t1": 0.0, "t2": 2.0, "t2p": 2.0, "max_runs": 3,
           "sparsifier": {"policy": "fixed", "fixed_cap": 0.5}}
    a = ds.detect(fixture_model, xs[1], table, cfg, input_id=1)
    b = ds.detect(fixture_model, xs[1], table, cfg, input_id=1)
    assert a == b
    assert a["runs_used"] == 3


def test_cw_attack_on_fixture(fixture_model):
    xs, labels = ds.synthetic_dataset(6, 12)
    x = xs[0]
    target = (labels[0] + 1) % fixture_model.num_classes
    r = ds.cw_l2(fixture_model, x, target, iters=100)
    adv = r["adversarial"]
    assert adv.shape == np.asarray(x).shape
    assert adv.min() >= 0.0 and adv.max() <= 1.0
    assert r["l2"] == pytest.approx(float(np.linalg.norm(adv - x)), rel=1e-4, abs=1e-6)


def test_simulate_group_hand_workload():
    masks = [[0, 1, 1, 0], [0, 1, 0, 1], [1, 0, 1, 0], [1, 0, 0, 1]]
    r = ds.simulate_group(masks, {"filters_per_tile": 4, "lanes_per_filter": 1, "lookahead": 2})
    assert r["cycles"] == 2
    assert r["cycle_macs"] == [4, 4]
    d = ds.simulate_group(masks, {"filters_per_tile": 4, "lookahead": 2, "mode": "dense"})
    assert d["cycles"] == 4


def test_errors_are_typed():
    with pytest.raises(ds.Error, match="InvalidArgument|DomainError"):
        ds.certified_radius(0.6, 0.2, -1.0)
    with pytest.raises(ds.Error):
        ds.load_model("/nonexistent/model.json")
