"""Learning-to-sample meta-path engine for heterogeneous social graphs."""

from lts.hin import (EmbedderSpec, HeteroGraph, NodeType, RawRecord, SyntheticSpec, build_graph,
                     generate_synthetic, load_corpus, preprocess_text)
from lts.metapath import MetaPath, MetaPathCatalog, construct_all, construct_features, enumerate_metapaths
from lts.sampling import SamplerState, SamplerStrategy, epsilon_at, sample_k, sample_one
from lts.trainer import RunConfig, TrainResult, ablate, run

__version__ = "0.1.0"
