"""Meta-path search space and meta-path feature construction."""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from lts.hin import EDGE_TYPES, EdgeType, HeteroGraph, NodeType, edge_type

_NEXT: dict[NodeType, tuple[NodeType, ...]] = {
    nt: tuple(sorted((et.target for et in EDGE_TYPES if et.source == nt), key=lambda x: x.value))
    for nt in NodeType
}


class GraphConsistencyError(RuntimeError):
    pass


@dataclass(frozen=True)
class MetaPath:
    node_seq: tuple[NodeType, ...]

    def __post_init__(self):
        if not self.node_seq or self.node_seq[0] != NodeType.Text:
            raise ValueError("meta-paths start at a Text node")
        for a, b in zip(self.node_seq, self.node_seq[1:]):
            edge_type(a, b)

    @classmethod
    def parse(cls, name: str) -> "MetaPath":
        return cls(tuple(NodeType.from_code(ch) for ch in name))

    @property
    def edge_seq(self) -> tuple[EdgeType, ...]:
        return tuple(EdgeType(a, b) for a, b in zip(self.node_seq, self.node_seq[1:]))

    @property
    def hops(self) -> int:
        return len(self.node_seq) - 1

    @property
    def terminal(self) -> NodeType:
        return self.node_seq[-1]

    @property
    def canonical_name(self) -> str:
        return "".join(nt.value for nt in self.node_seq)

    def __str__(self) -> str:
        return self.canonical_name


@dataclass(frozen=True)
class MetaPathCatalog:
    paths: tuple[MetaPath, ...]
    max_hops: int

    @property
    def M(self) -> int:
        return len(self.paths)

    def __len__(self) -> int:
        return len(self.paths)

    def __iter__(self) -> Iterator[MetaPath]:
        return iter(self.paths)

    def __getitem__(self, i: int) -> MetaPath:
        return self.paths[i]

    @property
    def names(self) -> list[str]:
        return [p.canonical_name for p in self.paths]

    def index(self, name: str) -> int:
        return self.names.index(name)

    def to_text(self) -> str:
        return "".join(n + "\n" for n in self.names)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_text(), encoding="utf-8")


def enumerate_metapaths(max_hops: int) -> MetaPathCatalog:
    """All schema-valid paths anchored at Text with at most ``max_hops`` edges.

    Ordered by ``(hops, canonical_name)``; that order fixes the importance
    vector index of every path.
    """
    if max_hops < 0:
        raise ValueError("max_hops must be >= 0")
    found: list[tuple[NodeType, ...]] = []
    stack: list[tuple[NodeType, ...]] = [(NodeType.Text,)]
    while stack:
        seq = stack.pop()
        found.append(seq)
        if len(seq) - 1 < max_hops:
            for nxt in _NEXT[seq[-1]]:
                stack.append(seq + (nxt,))
    paths = sorted((MetaPath(s) for s in found), key=lambda p: (p.hops, p.canonical_name))
    return MetaPathCatalog(tuple(paths), max_hops)


def _chain(graph: HeteroGraph, path: MetaPath):
    try:
        mats = [graph.adjacency[et] for et in path.edge_seq]
        feat = graph.features[path.terminal]
    except KeyError as exc:
        raise GraphConsistencyError(f"graph lacks {exc.args[0]!r} needed by {path}") from None
    rows = graph.node_counts[NodeType.Text]
    dims = [m.shape for m in mats] + [feat.shape]
    if dims[0][0] != rows:
        raise GraphConsistencyError(f"{path}: first factor has {dims[0][0]} rows, expected {rows}")
    for (_, c), (r, _) in zip(dims, dims[1:]):
        if c != r:
            raise GraphConsistencyError(f"{path}: chain dimension mismatch {dims}")
    return mats, feat


def construct_features(graph: HeteroGraph, path: MetaPath) -> np.ndarray:
    """Chain product ``A1 A2 ... Ah F`` evaluated right to left.

    Every intermediate is (nodes x feature-dim); no node-by-node product is
    ever formed.
    """
    mats, x = _chain(graph, path)
    x = np.array(x, dtype=float)
    for a in reversed(mats):
        x = np.asarray(a @ x)
    return x


def dense_oracle(graph: HeteroGraph, path: MetaPath) -> np.ndarray:
    """Same product with dense matrices multiplied left to right.  Test use only."""
    mats, feat = _chain(graph, path)
    prod = np.eye(graph.node_counts[NodeType.Text])
    for a in mats:
        prod = prod @ a.toarray()
    return prod @ np.asarray(feat)


@dataclass(frozen=True)
class MetaPathFeatureSet:
    catalog: MetaPathCatalog
    matrices: tuple[np.ndarray, ...]

    def __post_init__(self):
        if len(self.matrices) != len(self.catalog):
            raise ValueError("one matrix per catalog path required")
        rows = {m.shape[0] for m in self.matrices}
        if len(rows) > 1:
            raise ValueError(f"feature matrices disagree on text count: {sorted(rows)}")

    def __len__(self) -> int:
        return len(self.matrices)

    def __getitem__(self, m: int) -> np.ndarray:
        return self.matrices[m]

    @property
    def terminal_types(self) -> tuple[NodeType, ...]:
        return tuple(p.terminal for p in self.catalog)

    @property
    def num_texts(self) -> int:
        return self.matrices[0].shape[0]

    def input_dims(self) -> dict[NodeType, int]:
        dims: dict[NodeType, int] = {}
        for nt, x in zip(self.terminal_types, self.matrices):
            dims.setdefault(nt, x.shape[1])
        return dims

    def with_replaced(self, m: int, x: np.ndarray) -> "MetaPathFeatureSet":
        mats = list(self.matrices)
        mats[m] = x
        return MetaPathFeatureSet(self.catalog, tuple(mats))


def construct_all(graph: HeteroGraph, catalog: MetaPathCatalog, n_jobs: int = 1) -> MetaPathFeatureSet:
    """Features for every catalog path.

    Paths sharing a suffix share its partial product.  The arithmetic per path
    is exactly that of ``construct_features``, so results match it bit for bit.
    With ``n_jobs > 1`` paths are grouped by hop count and each level is
    computed in a thread pool; level h only reads level h-1 results.
    """
    # suffix products keyed by the node sequence of the suffix
    cache: dict[tuple[NodeType, ...], np.ndarray] = {}
    for nt in NodeType:
        if nt in graph.features:
            x = np.array(graph.features[nt], dtype=float)
            x.setflags(write=False)
            cache[(nt,)] = x

    suffixes_by_len: dict[int, set[tuple[NodeType, ...]]] = {}
    for p in catalog:
        seq = p.node_seq
        for i in range(len(seq) - 1):
            suffixes_by_len.setdefault(len(seq) - i, set()).add(seq[i:])

    for p in catalog:
        _chain(graph, p)  # validate shapes up front

    def one(seq):
        a = graph.adjacency[EdgeType(seq[0], seq[1])]
        x = np.asarray(a @ cache[seq[1:]])
        x.setflags(write=False)
        return seq, x

    for length in sorted(suffixes_by_len):
        todo = sorted(suffixes_by_len[length], key=lambda s: "".join(n.value for n in s))
        if n_jobs > 1:
            with ThreadPoolExecutor(n_jobs) as pool:
                results = list(pool.map(one, todo))
        else:
            results = [one(s) for s in todo]
        cache.update(results)

    return MetaPathFeatureSet(catalog, tuple(cache[p.node_seq] for p in catalog))


def names_to_indices(catalog: MetaPathCatalog, names: Sequence[str]) -> list[int]:
    lookup = {n: i for i, n in enumerate(catalog.names)}
    return [lookup[n] for n in names if n in lookup]
