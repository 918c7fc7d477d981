import itertools
from dataclasses import replace

import numpy as np
import pytest

from lts.hin import E, T, U, build_graph
from lts.metapath import (GraphConsistencyError, MetaPath, construct_all, construct_features,
                          dense_oracle, enumerate_metapaths, names_to_indices)
from conftest import random_records

VALID_PAIRS = {"TU", "UT", "TE", "ET", "UU"}


def brute_force_names(max_hops):
    out = []
    for n in range(max_hops + 1):
        for tail in itertools.product("TUE", repeat=n):
            s = "T" + "".join(tail)
            if all(s[i:i + 2] in VALID_PAIRS for i in range(len(s) - 1)):
                out.append(s)
    return sorted(out, key=lambda s: (len(s), s))


@pytest.mark.parametrize("hops,size", [(0, 1), (1, 3), (2, 6), (3, 12), (4, 22), (5, 41), (6, 74), (7, 135)])
def test_catalog_sizes(hops, size):
    assert len(enumerate_metapaths(hops)) == size


@pytest.mark.parametrize("hops", range(5))
def test_catalog_matches_brute_force(hops):
    assert enumerate_metapaths(hops).names == brute_force_names(hops)


def test_catalog_two_hops_listing():
    assert enumerate_metapaths(2).names == ["T", "TE", "TU", "TET", "TUT", "TUU"]


def test_metapath_validation():
    with pytest.raises(ValueError):
        MetaPath.parse("UT")
    with pytest.raises(ValueError):
        MetaPath.parse("TEE")
    p = MetaPath.parse("TUUT")
    assert p.hops == 3 and p.terminal is T and [e.name for e in p.edge_seq] == ["TU", "UU", "UT"]


def test_catalog_round_trip_text(tmp_path):
    cat = enumerate_metapaths(3)
    cat.save(tmp_path / "c.txt")
    assert (tmp_path / "c.txt").read_text().split() == cat.names
    assert names_to_indices(cat, ["TE", "nope", "T"]) == [1, 0]


def test_tut_by_hand(tiny_graph):
    f_t = np.array([[1.0, 0.0], [0.0, 1.0], [2.0, 2.0]])
    g = replace(tiny_graph, features={**tiny_graph.features, T: f_t})
    got = construct_features(g, MetaPath.parse("TUT"))
    np.testing.assert_allclose(got, [[0.5, 0.5], [0.5, 0.5], [2.0, 2.0]], atol=0)


def test_zero_hop_is_own_features(tiny_graph):
    np.testing.assert_array_equal(construct_features(tiny_graph, MetaPath.parse("T")),
                                  tiny_graph.features[T])


@pytest.mark.parametrize("seed", range(4))
def test_sparse_matches_dense_oracle(seed):
    g = build_graph(random_records(seed))
    for p in enumerate_metapaths(4):
        np.testing.assert_allclose(construct_features(g, p), dense_oracle(g, p), rtol=0, atol=1e-10)


@pytest.mark.parametrize("seed", range(3))
def test_rows_are_sub_stochastic(seed):
    # one-hot entity features: a T...E row is a distribution over entities, or
    # loses mass where the walk hits a node without out-edges
    g = build_graph(random_records(seed))
    te = construct_features(g, MetaPath.parse("TE")).sum(axis=1)
    assert np.all((np.abs(te - 1) < 1e-12) | (te == 0))
    for name in ("TUUTE", "TETE", "TUTE"):
        x = construct_features(g, MetaPath.parse(name))
        assert np.all(x >= 0)
        assert np.all(x.sum(axis=1) <= 1 + 1e-12)


def test_isolated_text_gets_zero_rows():
    recs = random_records(0)
    recs[0] = replace(recs[0], entities=())
    g = build_graph(recs)
    np.testing.assert_array_equal(construct_features(g, MetaPath.parse("TE"))[0], 0)
    np.testing.assert_array_equal(construct_features(g, MetaPath.parse("TETU"))[0], 0)


@pytest.mark.parametrize("n_jobs", [1, 3])
def test_construct_all_is_bit_identical(n_jobs):
    g = build_graph(random_records(7))
    cat = enumerate_metapaths(5)
    fs = construct_all(g, cat, n_jobs=n_jobs)
    assert len(fs) == 41
    for m, p in enumerate(cat):
        assert fs[m].tobytes() == construct_features(g, p).tobytes()
    assert fs.input_dims() == {T: 102, U: 102, E: g.node_counts[E]}


def test_inconsistent_graph_raises(tiny_graph):
    g = replace(tiny_graph, features={**tiny_graph.features, E: np.eye(5)})
    with pytest.raises(GraphConsistencyError):
        construct_features(g, MetaPath.parse("TE"))
