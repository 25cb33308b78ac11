import numpy as np
import pytest

from hcrep.model import (
    ModelConfig,
    classify,
    embed,
    fit_centroids,
    init_model,
    load_checkpoint,
    model_distance,
    predict,
    save_checkpoint,
    softmax,
)


@pytest.fixture
def model():
    return init_model(ModelConfig(input_dim=4, hidden_dims=(16, 12), embed_dim=8, init_seed=3))


def test_init_deterministic():
    a = init_model(ModelConfig(init_seed=5))
    b = init_model(ModelConfig(init_seed=5))
    c = init_model(ModelConfig(init_seed=6))
    assert all(np.array_equal(a.params[k], b.params[k]) for k in a.params)
    assert not np.array_equal(a.params["enc0.W"], c.params["enc0.W"])


def test_init_variance():
    m = init_model(ModelConfig(input_dim=300, hidden_dims=(500,), embed_dim=400, init_seed=0))
    W = m.params["enc0.W"]
    assert W.var() == pytest.approx(2 / (300 + 500), rel=0.05)
    assert np.all(m.params["enc0.b"] == 0)


@pytest.mark.parametrize("kw", [dict(hidden_dims=()), dict(embed_dim=0), dict(activation="sigmoid")])
def test_bad_config(kw):
    with pytest.raises(ValueError):
        ModelConfig(**kw)


def test_shapes_and_probabilities(model, rng):
    x = rng.random(4)
    assert embed(model, x).shape == (8,)
    assert embed(model, rng.random((5, 4))).shape == (5, 8)
    p = classify(model, rng.random((20, 4)))
    assert np.all(p >= 0)
    np.testing.assert_allclose(p.sum(1), 1.0, atol=1e-12)


def test_predict_is_argmax(model, rng):
    X = rng.random((50, 4))
    assert np.array_equal(predict(model, X), np.argmax(classify(model, X), axis=1))
    assert predict(model, X[0]) == int(np.argmax(classify(model, X[0])))


def test_predict_tie_goes_to_class_zero(model):
    m = model.copy()
    m.params["cls.W"][:] = 0
    m.params["cls.b"][:] = 0
    assert predict(m, np.zeros(4)) == 0


def test_dimension_mismatch(model):
    with pytest.raises(ValueError):
        embed(model, np.zeros(5))


def test_zero_input_zero_bias_gives_zero_embedding(model):
    assert np.all(embed(model, np.zeros(4)) == 0)


def test_embedding_sensitive_to_encoder_weights(model, rng):
    x = rng.random(4)
    base = embed(model, x)
    bumped = model.copy()
    bumped.params["enc0.W"][1, 2] += 1e-4
    diff = embed(bumped, x) - base
    assert np.abs(diff).max() > 0
    # the change is first order in the perturbation
    bumped.params["enc0.W"][1, 2] += 1e-4
    diff2 = embed(bumped, x) - base
    np.testing.assert_allclose(diff2, 2 * diff, rtol=1e-3, atol=1e-12)


def test_inference_is_pure(model, rng):
    before = {k: v.copy() for k, v in model.params.items()}
    X = rng.random((10, 4))
    embed(model, X), classify(model, X), predict(model, X), model_distance(model, X[0], X[1])
    assert all(np.array_equal(before[k], model.params[k]) for k in before)


def test_model_distance_properties(model, rng):
    a, b, c = rng.random((3, 4))
    assert model_distance(model, a, a) == 0
    assert model_distance(model, a, b) == pytest.approx(model_distance(model, b, a))
    for _ in range(100):
        a, b, c = rng.random((3, 4))
        assert model_distance(model, a, c) <= model_distance(model, a, b) + model_distance(model, b, c) + 1e-12


def test_softmax_stable():
    p = softmax(np.array([[1e4, -1e4], [-1e4, 1e4], [5.0, 5.0]]))
    assert np.all(np.isfinite(p))
    np.testing.assert_allclose(p, [[1, 0], [0, 1], [0.5, 0.5]])


def test_centroid_predictor(model, rng):
    X = rng.random((40, 4))
    y = (X[:, 0] > 0.5).astype(int)
    m = fit_centroids(model, X, y)
    e = embed(m, X)
    d = ((e[:, None] - m.centroids[None]) ** 2).sum(-1)
    assert np.array_equal(predict(m, X), d.argmin(1))


def test_checkpoint_roundtrip(tmp_path, model, rng):
    path = tmp_path / "m.json"
    save_checkpoint(model, path)
    back = load_checkpoint(path)
    assert back.config == model.config
    X = rng.random((5, 4))
    np.testing.assert_array_equal(embed(back, X), embed(model, X))
    m2 = fit_centroids(model, X, np.array([0, 1, 0, 1, 1]))
    save_checkpoint(m2, path)
    np.testing.assert_array_equal(load_checkpoint(path).centroids, m2.centroids)


def test_checkpoint_rejects_foreign_file(tmp_path):
    path = tmp_path / "m.json"
    path.write_text('{"format": "something"}')
    with pytest.raises(ValueError):
        load_checkpoint(path)
