"""
Building the graph and its meta-path features
=============================================

A handful of posts becomes a graph with three node types: texts (T),
users (U) and entities (E).  Each meta-path anchored at T turns into one
feature matrix, one row per text.
"""

import numpy as np

from lts.hin import E, T, U, RawRecord, build_graph
from lts.metapath import MetaPath, construct_all, construct_features, enumerate_metapaths

records = [
    RawRecord(0, "Storm hits the coast tonight", 1, ("storm", "coast"), 1_600_000_000, (45.0, 9.0), 0),
    RawRecord(1, "storm again, power is out https://t.co/x", 1, ("storm",), 1_600_086_400, None, 0),
    RawRecord(2, "Great game night downtown", 2, ("coast",), 1_600_172_800, None, 1),
    RawRecord(3, "final score 3-1", 3, ("game",), 1_600_200_000, (40.0, -3.7), 1),
]
graph = build_graph(records)
print({nt.name: n for nt, n in graph.node_counts.items()})

###############################################################################
# Adjacency matrices are row-normalized, so one step along an edge type
# averages the neighbours.  Users 1 and 2 both mention "coast", which is what
# links them.

print(graph.adj(U, U).toarray())
print(graph.adj(T, E).toarray())

###############################################################################
# The search space: every schema-valid path of up to ``max_hops`` edges.

catalog = enumerate_metapaths(3)
print(len(catalog), catalog.names)

###############################################################################
# TE averages the one-hot entity features of each text, so each row is the
# text's entity distribution.  TUT mixes a text with everything its author
# wrote.

te = construct_features(graph, MetaPath.parse("TE"))
print(np.round(te, 2))

features = construct_all(graph, catalog)
print({name: features[i].shape for i, name in enumerate(catalog.names)})
