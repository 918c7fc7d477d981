import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lts import importance
from lts.backbone import BackboneModel, ModelConfig
from lts.hin import build_graph
from lts.importance import ImportanceVector, init, normalize, parse_norm, top_k, update
from lts.metapath import construct_all, enumerate_metapaths
from conftest import random_records


def test_init_uniform():
    iv = init(4)
    np.testing.assert_array_equal(iv.mu, [0.25] * 4)
    assert not iv.mu.flags.writeable


def test_update_decays_and_accumulates():
    iv = ImportanceVector([0.4, 0.6], gamma=0.5)
    out = update(iv, {0: 0.9})
    np.testing.assert_allclose(out.mu, [1.1, 0.3])
    assert out.t == 1
    with pytest.raises(ValueError):
        update(iv, {1: 1.5})


def test_l1_normalize():
    out = normalize(ImportanceVector([1.1, 0.3]))
    np.testing.assert_allclose(out.mu, [1.1 / 1.4, 0.3 / 1.4])


def test_l2_normalize():
    out = normalize(ImportanceVector([3.0, 4.0], norm_mode="pnorm", p=2.0))
    np.testing.assert_allclose(out.mu, [0.6, 0.8])


def test_softmax_normalize():
    out = normalize(ImportanceVector([0.0, np.log(3.0)], norm_mode="softmax"))
    np.testing.assert_allclose(out.mu, [0.25, 0.75])


def test_zero_vector_resets_to_uniform():
    out = normalize(update(ImportanceVector([0.5, 0.5], gamma=0.0), {}))
    np.testing.assert_array_equal(out.mu, [0.5, 0.5])


def test_parse_norm():
    assert parse_norm("L2") == ("pnorm", 2.0)
    assert parse_norm("softmax") == ("softmax", 1.0)
    for bad in ("l0.5", "max", "l"):
        with pytest.raises(ValueError):
            parse_norm(bad)


def test_top_k_order_and_ties():
    assert top_k([0.1, 0.4, 0.4, 0.1], 3) == [1, 2, 0]
    assert top_k([0.3, 0.2], 2) == [0, 1]
    with pytest.raises(ValueError):
        top_k([0.3], 2)


# grid spacing 1e-5 on (0, 10]: far above rounding error, covers every reachable mu
positive = st.lists(st.integers(1, 1_000_000), min_size=2, max_size=20, unique=True).map(
    lambda v: np.array(v) / 1e5)


def strict_ranking_kept(v, out):
    i, j = np.triu_indices(len(v), 1)
    return bool(np.all(np.sign(v[i] - v[j]) == np.sign(out[i] - out[j])))


@settings(max_examples=500, deadline=None)
@given(v=positive, norm=st.sampled_from(["softmax", "l1", "l2"]))
def test_normalization_preserves_strict_ranking(v, norm):
    mode, p = parse_norm(norm)
    out = normalize(ImportanceVector(v, norm_mode=mode, p=p)).mu
    assert strict_ranking_kept(v, out)


def test_trajectory_round_trip(tmp_path):
    traj = [np.array([0.5, 0.5]), np.array([0.1 + 0.2, 0.7])]
    importance.write_trajectory(tmp_path / "mu.csv", ["T", "TE"], traj)
    names, back = importance.read_trajectory(tmp_path / "mu.csv")
    assert names == ["T", "TE"]
    assert [b.tobytes() for b in back] == [t.tobytes() for t in traj]


def _constant_model(features, bias_class):
    model = BackboneModel(ModelConfig(hidden=8), features.input_dims(), 2, seed=0)
    model.params["out.W"][:] = 0.0
    model.params["out.b"][:] = 0.0
    model.params["out.b"][bias_class] = 1.0
    return model


@pytest.mark.parametrize("bias_class,expected", [(0, 0.75), (1, 0.25)])
def test_evaluate_path_constant_predictor(bias_class, expected):
    g = build_graph(random_records(0))
    fs = construct_all(g, enumerate_metapaths(1))
    labels = np.zeros(40, dtype=int)
    labels[[3, 7]] = 1
    val = [0, 3, 5, 7, 8, 9, 10, 11]
    model = _constant_model(fs, bias_class)
    assert importance.evaluate_path(model, fs, 1, val, labels, init(len(fs))) == expected
    with pytest.raises(ValueError):
        importance.evaluate_path(model, fs, 1, [], labels, init(len(fs)))
