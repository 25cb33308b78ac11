import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hcrep.evaluate import (
    METRICS,
    EmbeddingIndex,
    EvalReport,
    SyntheticAgent,
    classification_accuracy,
    evaluate_model,
    furthest_in_class,
    h2h,
    justification,
    nearest_in_class,
    neutral_support,
    persuasive_support,
    riro_support,
    triplet_accuracy,
)
from hcrep.model import ModelConfig, init_model
from hcrep.oracle import SimilarityOracle
from hcrep.synth_data import SplitDataset, generate_dataset
from hcrep.triplets import sample_and_label


def identity_model(dim=4, scale=None):
    """Linear network whose embedding is ``x * scale`` and whose classifier
    reproduces the Square boundary closely enough for small tests."""
    m = init_model(ModelConfig(dim, (dim,), dim, "linear", "linear"))
    for k in m.params:
        m.params[k][:] = 0
    m.params["enc0.W"][:] = np.eye(dim)
    m.params["proj.W"][:] = np.diag(np.ones(dim) if scale is None else np.asarray(scale, float))
    return m


def with_labels_from(m, data):
    """Attach centroids so predictions come from the embedding."""
    from hcrep.model import fit_centroids

    return fit_centroids(m, data.features[data.train.ids], data.train.labels)


def brute_nn(E_query, E_train, train_ids, train_labels, cls, same, nearest):
    out = []
    for q, c in zip(E_query, cls):
        best, best_d = None, None
        for i, e, l in zip(train_ids, E_train, train_labels):
            if (l == c) != same:
                continue
            d = float(np.sqrt(((q - e) ** 2).sum()))
            better = best is None or (d < best_d if nearest else d > best_d)
            if better:
                best, best_d = i, d
        out.append(best)
    return np.array(out)


@pytest.mark.parametrize("same", [True, False])
@pytest.mark.parametrize("nearest", [True, False])
def test_index_matches_brute_force(vw, rng, same, nearest):
    m = init_model(ModelConfig(hidden_dims=(8,), embed_dim=5, init_seed=3))
    idx = EmbeddingIndex.build(m, vw)
    q = rng.random((200, 4))
    from hcrep.model import embed

    Eq = embed(m, q)
    cls = rng.integers(0, 2, 200)
    D = idx.distances(Eq)
    fn = {(True, True): idx.nearest, (True, False): idx.furthest, (False, True): idx.nearest_outside, (False, False): idx.furthest_outside}
    got = fn[(same, nearest)](D, cls)
    want = brute_nn(Eq, idx.embeddings, idx.ids, idx.labels, cls, same, nearest)
    assert np.array_equal(got, want)


def test_index_ties_go_to_lowest_id():
    idx = EmbeddingIndex(np.array([3, 5, 9]), np.array([0, 0, 1]), np.array([[1.0], [1.0], [5.0]]))
    D = idx.distances(np.array([[0.0]]))
    assert idx.nearest(D, [0])[0] == 3
    assert idx.furthest(D, [0])[0] == 3


def test_nearest_and_furthest_in_class(small_vw):
    m = identity_model()
    idx = EmbeddingIndex.build(m, small_vw)
    x = small_vw.test.features[0]
    tr = small_vw.train
    for c in (0, 1):
        ids = tr.class_ids(c)
        d = np.linalg.norm(small_vw.features[ids] - x, axis=1)
        assert nearest_in_class(idx, m, x, c) == ids[np.argmin(d)]
        assert furthest_in_class(idx, m, x, c) == ids[np.argmax(d)]


def test_missing_class_raises():
    idx = EmbeddingIndex(np.array([0, 1]), np.array([0, 0]), np.zeros((2, 2)))
    with pytest.raises(ValueError):
        idx.nearest(idx.distances(np.zeros((1, 2))), [1])


def test_h2h_self_is_half(vw):
    m = init_model(ModelConfig(hidden_dims=(8,), embed_dim=4))
    agent = SyntheticAgent(SimilarityOracle())
    assert h2h(m, m, "NI", agent, vw) == 0.5
    assert h2h(m, m, "NO", agent, vw) == 0.5


def test_h2h_is_antisymmetric(small_vw):
    a = init_model(ModelConfig(hidden_dims=(8,), embed_dim=4, init_seed=1))
    b = init_model(ModelConfig(hidden_dims=(8,), embed_dim=4, init_seed=2))
    agent = SyntheticAgent(SimilarityOracle((1, 2, 1, 1)))
    for mode in ("NI", "NO"):
        assert h2h(a, b, mode, agent, small_vw) + h2h(b, a, mode, agent, small_vw) == pytest.approx(1.0)


def test_h2h_human_metric_beats_shuffled(vw):
    # embedding equal to the agent's own warped features wins every NI round
    o = SimilarityOracle((1, 1, 1, 1))
    agent = SyntheticAgent(o)
    good = with_labels_from(identity_model(), vw)
    bad = with_labels_from(identity_model(scale=(0.0, 0.0, 1.0, 1.0)), vw)
    # force identical predictions so both justify within the same class
    bad.centroids = good.centroids.copy()
    assert h2h(good, bad, "NI", agent, vw) > 0.9


def test_justification_modes(small_vw):
    m = with_labels_from(identity_model(), small_vw)
    from hcrep.model import predict

    yhat = predict(m, small_vw.test.features)
    ni = justification(m, small_vw, "NI")
    no = justification(m, small_vw, "NO")
    assert np.array_equal(small_vw.labels[ni], yhat)
    assert np.all(small_vw.labels[no] != yhat)
    with pytest.raises(ValueError):
        justification(m, small_vw, "XX")


def test_untrained_model_accuracy_near_chance(vw):
    acc = [classification_accuracy(init_model(ModelConfig(hidden_dims=(16,), embed_dim=8, init_seed=s)), vw) for s in range(10)]
    assert abs(np.mean(acc) - 0.5) < 0.12


def test_classification_accuracy_of_perfect_rule(vw):
    # centroid predictor on the two informative features of a balanced square set
    m = with_labels_from(identity_model(), vw)
    assert classification_accuracy(m, vw, "test") > 0.5


def test_triplet_accuracy_identity_metric(vw):
    o = SimilarityOracle((1, 3, 2, 1))
    t = sample_and_label(vw, 500, "test", o, 0)
    assert triplet_accuracy(identity_model(scale=np.sqrt(o.weights)), t, vw) == 1.0
    # ties count as wrong: a constant embedding gets zero
    flat = identity_model(scale=np.zeros(4))
    assert triplet_accuracy(flat, t, vw) == 0.0


def test_riro_uninformative_agent_is_chance(vw):
    agent = SyntheticAgent(SimilarityOracle((0, 0, 1, 1)))
    vals = [riro_support(agent, vw, s) for s in range(20)]
    assert abs(np.mean(vals) - 0.5) < 0.03


def test_riro_below_guided_support(vw):
    o = SimilarityOracle((1, 1, 1, 1))
    agent = SyntheticAgent(o)
    m = with_labels_from(identity_model(), vw)
    riro = np.mean([riro_support(agent, vw, s) for s in range(5)])
    assert riro < neutral_support(m, agent, vw)
    assert riro_support(agent, vw, 3) == riro_support(agent, vw, 3)


def test_neutral_support_with_agent_metric_equals_alignment(vw):
    # showing the agent's own per-class nearest neighbours reproduces 1-NN
    from hcrep.oracle import task_alignment

    o = SimilarityOracle((1, 4, 2, 1))
    m = identity_model(scale=np.sqrt(o.weights))
    assert neutral_support(m, SyntheticAgent(o), vw) == pytest.approx(task_alignment(o, vw))


def _square_model(data):
    """Embedding equals the features; predictions come from the true labels."""
    m = identity_model()

    class Perfect:
        config = m.config
        params = m.params
        centroids = None

        def forward(self, x):
            e, logits, acts = m.forward(x)
            y = data.boundary.label(x[:, 0], x[:, 1])
            logits = np.stack([1.0 - y, y.astype(float)], axis=1)
            return e, logits, acts

    return Perfect()


def test_persuasive_is_perfect_for_correct_model_with_agent_metric(vw):
    # nearest same-class vs furthest other-class under the agent's own metric
    o = SimilarityOracle((1, 1, 1, 1))
    m = _square_model(vw)
    assert classification_accuracy(m, vw) == 1.0
    assert persuasive_support(m, SyntheticAgent(o), vw) == 1.0


def test_single_example_class():
    rng = np.random.default_rng(0)
    X = rng.random((40, 4))
    y = np.zeros(40, dtype=np.int64)
    split = np.array([0] * 24 + [1] * 8 + [2] * 8)
    y[3] = 1
    y[30] = 1
    y[35] = 1
    data = SplitDataset(X, y, split)
    m = with_labels_from(identity_model(), data)
    agent = SyntheticAgent(SimilarityOracle())
    assert 0 <= neutral_support(m, agent, data) <= 1
    assert 0 <= persuasive_support(m, agent, data) <= 1
    assert set(data.labels[justification(m, data, "NO")]) <= {0, 1}


def _permute(data, perm):
    """Same examples under new ids."""
    inv = np.argsort(perm)
    return SplitDataset(data.features[perm], data.labels[perm], data.split[perm], data.boundary, data.seed), inv


def test_metrics_invariant_to_id_permutation(small_vw):
    o = SimilarityOracle((1, 2, 1, 1))
    agent = SyntheticAgent(o)
    m = init_model(ModelConfig(hidden_dims=(8,), embed_dim=6, init_seed=5))
    perm = np.random.default_rng(1).permutation(len(small_vw.labels))
    other, inv = _permute(small_vw, perm)
    assert classification_accuracy(m, small_vw) == classification_accuracy(m, other)
    assert neutral_support(m, agent, small_vw) == pytest.approx(neutral_support(m, agent, other))
    assert persuasive_support(m, agent, small_vw) == pytest.approx(persuasive_support(m, agent, other))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000))
def test_support_metrics_are_fractions(seed):
    data = generate_dataset(60, seed=seed % 50 + 1, balance=True)
    m = init_model(ModelConfig(hidden_dims=(4,), embed_dim=3, init_seed=seed))
    agent = SyntheticAgent(SimilarityOracle((1, 1, 0, 2)))
    n = len(data.test)
    for v in (neutral_support(m, agent, data), persuasive_support(m, agent, data), riro_support(agent, data, seed)):
        assert 0 <= v <= 1
        assert float(v * n).is_integer() or abs(v * n - round(v * n)) < 1e-9


def test_eval_report_roundtrip(small_vw):
    o = SimilarityOracle()
    t = sample_and_label(small_vw, 100, "test", o, 0)
    m = init_model(ModelConfig(hidden_dims=(8,), embed_dim=4))
    r = evaluate_model("HC", m, SyntheticAgent(o), small_vw, t, seed=2, config={"lam": 0.5})
    assert r.ni_h2h == 0.5 and r.no_h2h == 0.5
    doc = json.loads(r.to_json())
    assert set(doc) == set(METRICS) | {"model", "seed", "config"}
    assert EvalReport.from_json(r.to_json()) == r
    assert list(r.metrics()) == list(METRICS)
