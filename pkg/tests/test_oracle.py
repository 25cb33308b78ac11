import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hcrep.oracle import (
    SimilarityOracle,
    human_distance,
    judge_triplet,
    nearest_train,
    parse_weights,
    search_weights,
    task_alignment,
)
from hcrep.synth_data import InsectExample, generate_dataset


def ex(*f, i=0):
    return InsectExample(i, *f, 0)


def test_distance_examples():
    o = SimilarityOracle((1, 1, 1, 1))
    a = ex(0.2, 0.3, 0.4, 0.5)
    assert human_distance(a, a, o) == 0.0
    assert human_distance(ex(0, 0, 0, 0), ex(1, 1, 1, 1), o) == pytest.approx(2.0)
    distract = SimilarityOracle((0, 0, 1, 1))
    assert human_distance(ex(0.1, 0.9, 0.5, 0.5), ex(0.8, 0.2, 0.5, 0.5), distract) == 0.0


def test_distance_is_weighted_euclidean(rng):
    w = np.array([1.0, 256, 3, 0.5])
    o = SimilarityOracle(tuple(w))
    a, b = rng.random(4), rng.random(4)
    assert human_distance(a, b, o) == pytest.approx(np.sqrt(np.sum(w * (a - b) ** 2)))


@pytest.mark.parametrize("w", [(0, 0, 0, 0), (-1, 1, 1, 1), (1, 1, 1), (np.inf, 1, 1, 1)])
def test_invalid_weights(w):
    with pytest.raises(ValueError):
        SimilarityOracle(w)


def test_parse_weights():
    assert parse_weights("1,256,256,256").weights == (1.0, 256.0, 256.0, 256.0)
    with pytest.raises(ValueError):
        parse_weights("1,a,1,1")


def test_judge_triplet_rules():
    o = SimilarityOracle((1, 1, 1, 1))
    ref = ex(0.5, 0.5, 0.5, 0.5)
    near = ex(0.55, 0.5, 0.5, 0.5)
    far = ex(0.9, 0.5, 0.5, 0.5)
    assert judge_triplet(ref, near, far, o) == (0, False)
    assert judge_triplet(ref, far, near, o) == (1, False)
    left, right = ex(0.25, 0.5, 0.5, 0.5), ex(0.75, 0.5, 0.5, 0.5)
    assert judge_triplet(ref, right, left, o) == (0, True)
    assert judge_triplet(ref, ref, far, o)[0] == 0


def test_metric_axioms_on_random_triples(rng):
    for _ in range(1000):
        w = rng.random(4) * rng.integers(0, 2, 4)
        if not w.any():
            w[0] = 1.0
        o = SimilarityOracle(tuple(w))
        a, b, c = rng.random((3, 4))
        dab, dba = human_distance(a, b, o), human_distance(b, a, o)
        assert dab >= 0
        assert dab == pytest.approx(dba, abs=1e-15)
        assert human_distance(a, c, o) <= dab + human_distance(b, c, o) + 1e-12
        assert human_distance(a, a, o) == 0


@settings(max_examples=50, deadline=None)
@given(scale=st.floats(1e-3, 1e3), seed=st.integers(0, 10_000))
def test_scaling_weights_keeps_judgements(scale, seed):
    rng = np.random.default_rng(seed)
    w = rng.random(4) + 0.01
    o1, o2 = SimilarityOracle(tuple(w)), SimilarityOracle(tuple(w * scale))
    r, c1, c2 = rng.random((3, 4))
    d1, d2 = human_distance(r, c1, o1), human_distance(r, c2, o1)
    if abs(d1 - d2) > 1e-9 * max(d1, d2):
        assert judge_triplet(r, c1, c2, o1) == judge_triplet(r, c1, c2, o2)


def test_scaling_weights_keeps_alignment(small_vw):
    o = SimilarityOracle((1, 4, 2, 0.5))
    o2 = SimilarityOracle((3, 12, 6, 1.5))
    assert np.array_equal(nearest_train(o, small_vw.test.features, small_vw), nearest_train(o2, small_vw.test.features, small_vw))
    assert task_alignment(o, small_vw) == task_alignment(o2, small_vw)


def test_alignment_brute_force(small_vw):
    o = SimilarityOracle((1, 2, 1, 1))
    train = small_vw.examples("train")
    correct = 0
    for q in small_vw.examples("test"):
        best = min(train, key=lambda t: (human_distance(q, t, o), t.id))
        correct += best.label == q.label
    assert task_alignment(o, small_vw) == pytest.approx(correct / len(small_vw.test))


def test_alignment_table_settings(vw):
    assert 0.45 <= task_alignment(SimilarityOracle((0, 0, 1, 1)), vw) <= 0.55
    assert task_alignment(SimilarityOracle((1, 1, 1, 1)), vw) >= 0.97
    mid = task_alignment(SimilarityOracle((1, 256, 256, 256)), vw)
    assert 0.6 < mid < 1.0


def test_distractor_alignment_tends_to_half():
    # distractors carry no label information, so 1-NN on them is a coin flip
    vals = [task_alignment(SimilarityOracle((0, 0, 1, 1)), generate_dataset(4000, seed=s, balance=True, margin=0.05)) for s in range(4)]
    assert abs(np.mean(vals) - 0.5) < 0.03


def test_alignment_needs_two_classes():
    d = generate_dataset(50, seed=0, balance=True)
    d.labels[:] = 0
    d.__post_init__()
    with pytest.raises(ValueError):
        task_alignment(SimilarityOracle(), d)


def test_search_weights_grid(small_vw):
    out = search_weights(0, small_vw)
    assert len(out) == 15
    weights = [w for w, _ in out]
    assert (1.0, 1.0, 1.0, 1.0) in weights
    assert all(0.45 <= a <= 1.0 for _, a in out)


def test_search_weights_budget_warning(small_vw):
    with pytest.warns(RuntimeWarning):
        search_weights(1, small_vw, budget=10)
