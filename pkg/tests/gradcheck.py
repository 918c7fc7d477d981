"""Central finite-difference check of ``loss_and_grads``, shared by unit and acceptance tests."""
import numpy as np

from lts.backbone import BackboneModel, ModelConfig, loss_and_grads
from lts.hin import build_graph
from lts.importance import init
from lts.metapath import construct_all, enumerate_metapaths
from conftest import random_records


def setup(seed=0, hidden=8, classes=3, rows=20):
    g = build_graph(random_records(seed, n_texts=rows, n_classes=classes))
    fs = construct_all(g, enumerate_metapaths(2))
    model = BackboneModel(ModelConfig(hidden=hidden), fs.input_dims(), classes, seed=seed)
    rng = np.random.default_rng(seed)
    # move off the initial values so every parameter has a generic gradient
    for v in model.params.values():
        v += rng.normal(scale=0.1, size=v.shape)
    labels = rng.integers(0, classes, size=rows)
    mu = init(len(fs)).mu + rng.uniform(0, 0.2, size=len(fs))
    return model, fs, np.arange(rows), labels, mu


def max_relative_error(seed=0, step=1e-5, mask=None):
    model, fs, rows, labels, mu = setup(seed)
    mask = list(range(len(fs))) if mask is None else mask
    model.train()

    def f():
        return loss_and_grads(model, fs, rows, labels, mu, mask, np.random.default_rng(99))[0]

    _, grads, _ = loss_and_grads(model, fs, rows, labels, mu, mask, np.random.default_rng(99))
    worst = {}
    for name, g in grads.items():
        p = model.params[name]
        num = np.empty_like(p)
        for idx in np.ndindex(p.shape):
            old = p[idx]
            p[idx] = old + step
            up = f()
            p[idx] = old - step
            down = f()
            p[idx] = old
            num[idx] = (up - down) / (2 * step)
        # below the step size the comparison is absolute: the pre-norm bias has a
        # structurally zero gradient and its difference quotient is pure noise
        scale = np.maximum(np.maximum(np.abs(g), np.abs(num)), step)
        worst[name] = float(np.max(np.abs(g - num) / scale))
    return max(worst.values()), worst
