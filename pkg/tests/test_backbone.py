import numpy as np
import pytest

from lts.backbone import (BackboneModel, ModelConfig, NonFiniteLoss, encode, fuse, load_checkpoint, loss,
                          loss_and_grads, predict, save_checkpoint, train_step)
from lts.hin import E, T, build_graph
from lts.importance import init
from lts.metapath import construct_all, enumerate_metapaths
from conftest import random_records
import gradcheck


def test_gradients_match_finite_differences():
    worst, per_param = gradcheck.max_relative_error(seed=0)
    assert worst < 1e-4, per_param
    assert len(per_param) == 16


def test_gradients_with_partial_mask():
    # paths 1 and 4 end at E and T: no user encoder gradient
    worst, per_param = gradcheck.max_relative_error(seed=1, mask=[1, 3])
    assert worst < 1e-4
    assert not any(k.startswith("enc.U") for k in per_param)


def test_loss_by_hand():
    logits = np.array([[0.0, np.log(3.0)], [0.0, 0.0]])
    assert loss(logits, [1, 0]) == pytest.approx((np.log(4 / 3) + np.log(2)) / 2)


def test_uniform_logits_give_log_c():
    assert loss(np.zeros((5, 7)), [0, 1, 2, 3, 6]) == pytest.approx(np.log(7))


@pytest.fixture
def small():
    g = build_graph(random_records(2, n_texts=50, n_classes=3))
    fs = construct_all(g, enumerate_metapaths(2))
    model = BackboneModel(ModelConfig(hidden=16), fs.input_dims(), 3, seed=0)
    return model, fs


def test_mu_shift_invariance(small):
    model, fs = small
    mu = np.linspace(0.1, 0.6, len(fs))
    enc = encode(model, fs, [0, 2, 5])
    a = fuse(enc, mu, [0, 2, 5])
    b = fuse(enc, mu + 3.0, [0, 2, 5])
    np.testing.assert_allclose(a, b, rtol=1e-12)


def test_inactive_paths_are_ignored(small):
    model, fs = small
    mu = init(len(fs))
    before = predict(model, fs, mu, [1, 2])
    junk = fs.with_replaced(0, np.full_like(fs[0], 1e6)).with_replaced(5, np.zeros_like(fs[5]))
    np.testing.assert_array_equal(predict(model, junk, mu, [1, 2]), before)


def test_empty_mask_uses_zero_fusion(small):
    model, fs = small
    assert predict(model, fs, init(len(fs)), []).shape == (50,)


def test_zero_learning_rate_keeps_parameters(small):
    model, fs = small
    snapshot = {k: v.copy() for k, v in model.params.items()}
    rows = np.arange(50)
    train_step(model, fs, (rows, rows % 3), init(len(fs)), [0, 1], np.random.default_rng(0), lr=0.0)
    for k, v in model.params.items():
        np.testing.assert_array_equal(v, snapshot[k])
    assert model.adam_steps["enc.T.W"] == 1 and model.adam_steps["enc.U.W"] == 0


def test_running_statistics_update(small):
    model, fs = small
    rows = np.arange(50)
    train_step(model, fs, (rows, rows % 3), init(len(fs)), [0], np.random.default_rng(0))
    assert np.all(model.buffers["bn.running_var"] != 1.0)
    assert np.all(model.buffers["bn.running_mean"] != 0.0)


def test_memorizes_separable_task():
    # 50 texts with 102-dim features: any labelling is linearly separable
    g = build_graph(random_records(5, n_texts=50, n_classes=3))
    fs = construct_all(g, enumerate_metapaths(0))
    labels = np.random.default_rng(1).integers(0, 3, size=50)
    model = BackboneModel(ModelConfig(), fs.input_dims(), 3, seed=0)
    rng = np.random.default_rng(0)
    rows = np.arange(50)
    losses = [train_step(model, fs, (rows, labels), init(1), [0], rng) for _ in range(300)]
    assert losses[-1] < 0.1
    assert np.mean(predict(model, fs, init(1), [0]) == labels) == 1.0


def test_eval_is_deterministic(small):
    model, fs = small
    mu = init(len(fs))
    np.testing.assert_array_equal(predict(model, fs, mu, [0, 3]), predict(model, fs, mu, [0, 3]))


def test_non_finite_loss_raises(small):
    model, fs = small
    model.params["out.b"][0] = np.nan
    rows = np.arange(10)
    with pytest.raises(NonFiniteLoss):
        train_step(model, fs, (rows, rows % 3), init(len(fs)), [0], np.random.default_rng(0))


def test_checkpoint_round_trip(small, tmp_path):
    model, fs = small
    rows = np.arange(50)
    for _ in range(3):
        train_step(model, fs, (rows, rows % 3), init(len(fs)), [0, 4], np.random.default_rng(0))
    save_checkpoint(model, tmp_path / "m.ckpt")
    back = load_checkpoint(tmp_path / "m.ckpt")
    assert back.to_bytes() == model.to_bytes()
    assert back.adam_steps == model.adam_steps
    np.testing.assert_array_equal(predict(back, fs, init(len(fs)), [0, 4]),
                                  predict(model, fs, init(len(fs)), [0, 4]))


def test_bad_checkpoint(tmp_path):
    (tmp_path / "x").write_bytes(b"nonsense")
    with pytest.raises(ValueError):
        load_checkpoint(tmp_path / "x")


def test_config_limits():
    with pytest.raises(ValueError):
        ModelConfig(decoder_layers=3)
    with pytest.raises(ValueError):
        ModelConfig(dropout=1.0)


def test_missing_encoder(small):
    model, fs = small
    model2 = BackboneModel(ModelConfig(hidden=4), {T: 3}, 2)
    with pytest.raises(KeyError):
        model2.encoder_for(E)
