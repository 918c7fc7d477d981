"""Heterogeneous information network built from social-media records.

Three node types (Text, User, Entity) and five directed edge types.  Each
edge type is stored as a row-normalized CSR matrix; node features are dense
float64 matrices, one per node type.
"""
from __future__ import annotations

import enum
import hashlib
import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, NamedTuple, Sequence

import numpy as np
import scipy.sparse as sp

from lts._stopwords import STOP_WORDS

EMBED_DIM = 100


class CorpusParseError(ValueError):
    """A corpus line is not valid JSON."""

    def __init__(self, lineno: int, msg: str):
        super().__init__(f"line {lineno}: {msg}")
        self.lineno = lineno


class CorpusSchemaError(ValueError):
    """A corpus record is missing a field or carries an invalid value."""


class SpecError(ValueError):
    """A synthetic-corpus specification cannot be satisfied."""


class NodeType(str, enum.Enum):
    Text = "T"
    User = "U"
    Entity = "E"

    @classmethod
    def from_code(cls, code: str) -> "NodeType":
        try:
            return cls(code)
        except ValueError:
            raise ValueError(f"unknown node type code {code!r}") from None


class EdgeType(NamedTuple):
    source: NodeType
    target: NodeType

    @property
    def name(self) -> str:
        return self.source.value + self.target.value


T, U, E = NodeType.Text, NodeType.User, NodeType.Entity

EDGE_TYPES: tuple[EdgeType, ...] = (
    EdgeType(U, T),
    EdgeType(T, U),
    EdgeType(T, E),
    EdgeType(E, T),
    EdgeType(U, U),
)


def edge_type(source: NodeType, target: NodeType) -> EdgeType:
    """Return the edge type for ``source -> target``; raise if the schema lacks it."""
    et = EdgeType(NodeType(source), NodeType(target))
    if et not in EDGE_TYPES:
        raise ValueError(f"edge type {et.name} is not part of the schema")
    return et


@dataclass(frozen=True)
class RawRecord:
    record_id: int
    text: str
    user_id: int
    entities: tuple[str, ...]
    timestamp: int
    location: tuple[float, float] | None
    label: int

    def to_json(self) -> str:
        obj = {
            "id": self.record_id,
            "text": self.text,
            "user_id": self.user_id,
            "entities": list(self.entities),
            "timestamp": self.timestamp,
            "location": None if self.location is None else list(self.location),
            "label": self.label,
        }
        return json.dumps(obj, ensure_ascii=False)


# --------------------------------------------------------------------------
# corpus IO
# --------------------------------------------------------------------------

_FIELDS = ("id", "text", "user_id", "entities", "timestamp", "location", "label")


def _is_int(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def _record_from_obj(obj, lineno: int) -> RawRecord:
    if not isinstance(obj, dict):
        raise CorpusSchemaError(f"line {lineno}: record must be a JSON object")
    missing = [f for f in _FIELDS if f not in obj]
    if missing:
        raise CorpusSchemaError(f"line {lineno}: missing field(s) {', '.join(missing)}")
    extra = sorted(set(obj) - set(_FIELDS))
    if extra:
        raise CorpusSchemaError(f"line {lineno}: unknown field(s) {', '.join(extra)}")

    for name in ("id", "user_id", "timestamp", "label"):
        if not _is_int(obj[name]):
            raise CorpusSchemaError(f"line {lineno}: {name} must be an integer")
    for name in ("user_id", "label"):
        if obj[name] < 0:
            raise CorpusSchemaError(f"line {lineno}: {name} must be non-negative")
    if not isinstance(obj["text"], str):
        raise CorpusSchemaError(f"line {lineno}: text must be a string")
    ents = obj["entities"]
    if not isinstance(ents, list) or not all(isinstance(e, str) for e in ents):
        raise CorpusSchemaError(f"line {lineno}: entities must be an array of strings")
    loc = obj["location"]
    if loc is not None:
        if (not isinstance(loc, list) or len(loc) != 2
                or not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in loc)):
            raise CorpusSchemaError(f"line {lineno}: location must be null or [lat, lon]")
        loc = (float(loc[0]), float(loc[1]))
    return RawRecord(
        record_id=obj["id"],
        text=obj["text"],
        user_id=obj["user_id"],
        entities=tuple(ents),
        timestamp=obj["timestamp"],
        location=loc,
        label=obj["label"],
    )


def load_corpus(path: str | Path) -> list[RawRecord]:
    """Read a JSON Lines corpus.  Blank lines are skipped."""
    records = []
    seen: set[int] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusParseError(lineno, exc.msg) from None
            rec = _record_from_obj(obj, lineno)
            if rec.record_id in seen:
                raise CorpusSchemaError(f"line {lineno}: duplicate id {rec.record_id}")
            seen.add(rec.record_id)
            records.append(rec)
    return records


def write_corpus(records: Iterable[RawRecord], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for rec in records:
            fh.write(rec.to_json())
            fh.write("\n")


# --------------------------------------------------------------------------
# text
# --------------------------------------------------------------------------

_URL_RE = re.compile(r"[A-Za-z][A-Za-z0-9+.\-]*://\S*")
_EMOJI_RE = re.compile(
    "["
    "\U0001F000-\U0001FAFF"
    "\u2300-\u23FF"
    "\u2600-\u27BF"
    "\u2B00-\u2BFF"
    "\uFE0E\uFE0F\u200D\u20E3"
    "]+"
)
_TOKEN_RE = re.compile(r"\w+(?:'\w+)*")


def preprocess_text(text: str) -> list[str]:
    """Lowercase tokens with URLs, emoji and stop-words removed."""
    text = _URL_RE.sub(" ", text)
    text = _EMOJI_RE.sub(" ", text)
    return [tok for tok in _TOKEN_RE.findall(text.lower()) if tok not in STOP_WORDS]


class HashingEmbedder:
    """Signed feature hashing of a token multiset into ``dim`` buckets.

    Buckets and signs come from keyed BLAKE2b, so the output depends only on
    the tokens and the seed (never on ``PYTHONHASHSEED``).  Non-empty outputs
    are scaled to unit L2 norm.
    """

    def __init__(self, dim: int = EMBED_DIM, seed: int = 0):
        self.dim = dim
        self.seed = seed
        self._key = int(seed).to_bytes(8, "little", signed=True)
        self._cache: dict[str, tuple[int, float]] = {}

    def _slot(self, token: str) -> tuple[int, float]:
        hit = self._cache.get(token)
        if hit is None:
            digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8, key=self._key).digest()
            h = int.from_bytes(digest, "little")
            hit = (h % self.dim, 1.0 if (h >> 63) & 1 == 0 else -1.0)
            self._cache[token] = hit
        return hit

    def embed(self, tokens: Sequence[str]) -> np.ndarray:
        v = np.zeros(self.dim)
        for tok in sorted(tokens):
            i, s = self._slot(tok)
            v[i] += s
        n = np.linalg.norm(v)
        return v / n if n > 0 else v


class PrecomputedEmbedder:
    """Mean of externally supplied word vectors; unknown tokens are ignored."""

    def __init__(self, vectors: Mapping[str, np.ndarray], dim: int = EMBED_DIM):
        self.dim = dim
        self.vectors = {}
        for word, vec in vectors.items():
            vec = np.asarray(vec, dtype=float)
            if vec.shape != (dim,):
                raise ValueError(f"vector for {word!r} has shape {vec.shape}, expected ({dim},)")
            self.vectors[word] = vec

    @classmethod
    def from_text_file(cls, path: str | Path, dim: int = EMBED_DIM) -> "PrecomputedEmbedder":
        """Load word2vec-style text vectors (``word v1 ... vdim`` per line)."""
        vectors = {}
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                parts = line.rstrip().split(" ")
                if len(parts) != dim + 1:
                    continue  # header line or malformed row
                vectors[parts[0]] = np.array(parts[1:], dtype=float)
        return cls(vectors, dim)

    def embed(self, tokens: Sequence[str]) -> np.ndarray:
        hits = [self.vectors[t] for t in sorted(tokens) if t in self.vectors]
        if not hits:
            return np.zeros(self.dim)
        return np.mean(hits, axis=0)


@dataclass(frozen=True)
class EmbedderSpec:
    kind: str = "hashing"          # "hashing" | "precomputed"
    dimension: int = EMBED_DIM
    seed: int = 0
    path: str | None = None        # word-vector file for kind="precomputed"

    def build(self):
        if self.dimension != EMBED_DIM:
            raise ValueError(f"embedding dimension is fixed at {EMBED_DIM}")
        if self.kind == "hashing":
            return HashingEmbedder(self.dimension, self.seed)
        if self.kind == "precomputed":
            if not self.path:
                raise ValueError("precomputed embedder needs a vector file path")
            return PrecomputedEmbedder.from_text_file(self.path, self.dimension)
        raise ValueError(f"unknown embedder kind {self.kind!r}")


def _as_embedder(embedder):
    if embedder is None:
        return HashingEmbedder()
    if isinstance(embedder, EmbedderSpec):
        return embedder.build()
    return embedder


# --------------------------------------------------------------------------
# features and graph
# --------------------------------------------------------------------------

def temporal_encoding(timestamps: Sequence[int]) -> np.ndarray:
    """(min-max normalized epoch time, fractional day of week in [0, 1))."""
    ts = np.asarray(timestamps, dtype=float)
    lo, hi = ts.min(), ts.max()
    scaled = (ts - lo) / (hi - lo) if hi > lo else np.zeros_like(ts)
    # 1970-01-01 was a Thursday; shift so Monday 00:00 UTC maps to 0.
    days = ts / 86400.0 + 3.0
    dow = np.mod(days, 7.0) / 7.0
    dow = np.where(dow >= 1.0, 0.0, dow)
    return np.column_stack([scaled, dow])


def location_encoding(location: tuple[float, float] | None) -> np.ndarray:
    if location is None:
        return np.zeros(2)
    lat, lon = location
    return np.array([lat / 90.0, lon / 180.0])


def _index_nodes(records: Sequence[RawRecord]) -> tuple[list[int], dict[str, int]]:
    users = sorted({r.user_id for r in records})
    entities = sorted({e for r in records for e in r.entities})
    return users, {e: i for i, e in enumerate(entities)}


def build_node_features(records: Sequence[RawRecord], embedder=None,
                        entity_vocab: Mapping[str, int] | None = None):
    """Return ``(F_T, F_U, F_E)`` for the given records.

    Users are ordered by ascending id and entities by ``entity_vocab`` (sorted
    entity strings by default).  A user's word embedding covers the union of
    tokens over everything that user wrote; the location part is taken from
    the user's most recent geotagged record.
    """
    if not records:
        raise ValueError("records must be non-empty")
    emb = _as_embedder(embedder)
    users, vocab = _index_nodes(records)
    if entity_vocab is not None:
        vocab = dict(entity_vocab)
    user_row = {u: i for i, u in enumerate(users)}

    tokens = [preprocess_text(r.text) for r in records]
    f_txt = np.vstack([emb.embed(t) for t in tokens])
    f_t = np.hstack([f_txt, temporal_encoding([r.timestamp for r in records])])

    user_tokens: list[set[str]] = [set() for _ in users]
    user_loc: list[tuple[int, tuple[float, float]] | None] = [None] * len(users)
    for r, toks in zip(records, tokens):
        i = user_row[r.user_id]
        user_tokens[i].update(toks)
        if r.location is not None and (user_loc[i] is None or r.timestamp >= user_loc[i][0]):
            user_loc[i] = (r.timestamp, r.location)
    f_u = np.vstack([
        np.concatenate([emb.embed(sorted(user_tokens[i])),
                        location_encoding(None if user_loc[i] is None else user_loc[i][1])])
        for i in range(len(users))
    ])

    f_e = np.eye(len(vocab))
    return f_t, f_u, f_e


def row_normalize(mat: sp.spmatrix) -> sp.csr_matrix:
    """Scale every nonzero row to sum 1; all-zero rows are left as they are."""
    mat = sp.csr_matrix(mat, dtype=float)
    sums = np.asarray(mat.sum(axis=1)).ravel()
    inv = np.zeros_like(sums)
    nz = sums != 0
    inv[nz] = 1.0 / sums[nz]
    out = sp.diags(inv) @ mat
    out = sp.csr_matrix(out)
    out.sort_indices()
    return out


@dataclass(frozen=True)
class HeteroGraph:
    node_counts: Mapping[NodeType, int]
    features: Mapping[NodeType, np.ndarray]
    adjacency: Mapping[EdgeType, sp.csr_matrix]
    entity_vocab: Mapping[str, int]
    user_ids: tuple[int, ...] = ()
    raw_adjacency: Mapping[EdgeType, sp.csr_matrix] = field(default_factory=dict, repr=False)

    def adj(self, source: NodeType, target: NodeType) -> sp.csr_matrix:
        return self.adjacency[edge_type(source, target)]

    def check(self) -> None:
        """Raise ``AssertionError`` if matrix shapes disagree with node counts."""
        for et, mat in self.adjacency.items():
            want = (self.node_counts[et.source], self.node_counts[et.target])
            assert mat.shape == want, f"{et.name}: shape {mat.shape} != {want}"
        for nt, feat in self.features.items():
            assert feat.shape[0] == self.node_counts[nt], f"{nt.name} features misaligned"


def _freeze(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


def build_graph(records: Sequence[RawRecord], embedder=None) -> HeteroGraph:
    """Build the heterogeneous graph.

    Texts are the records (in order), users the distinct authors and entities
    the distinct mentioned strings.  Two users are linked when they mention at
    least one common entity.
    """
    if not records:
        raise ValueError("records must be non-empty")
    users, vocab = _index_nodes(records)
    user_row = {u: i for i, u in enumerate(users)}
    n_t, n_u, n_e = len(records), len(users), len(vocab)

    author = np.array([user_row[r.user_id] for r in records])
    a_tu = sp.csr_matrix((np.ones(n_t), (np.arange(n_t), author)), shape=(n_t, n_u))

    rows, cols = [], []
    for i, r in enumerate(records):
        for e in sorted(set(r.entities)):
            rows.append(i)
            cols.append(vocab[e])
    a_te = sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n_t, n_e))

    # users co-mentioning an entity
    u_e = (a_tu.T @ a_te).tocsr()
    u_e.data[:] = 1.0
    a_uu = (u_e @ u_e.T).tocsr()
    a_uu.setdiag(0)
    a_uu.eliminate_zeros()
    a_uu.data[:] = 1.0

    raw = {
        EdgeType(T, U): a_tu,
        EdgeType(U, T): a_tu.T.tocsr(),
        EdgeType(T, E): a_te,
        EdgeType(E, T): a_te.T.tocsr(),
        EdgeType(U, U): a_uu,
    }
    for m in raw.values():
        m.sum_duplicates()
        m.data[:] = 1.0
        m.sort_indices()
    adjacency = {et: row_normalize(m) for et, m in raw.items()}

    f_t, f_u, f_e = build_node_features(records, embedder, entity_vocab=vocab)
    graph = HeteroGraph(
        node_counts={T: n_t, U: n_u, E: n_e},
        features={T: _freeze(f_t), U: _freeze(f_u), E: _freeze(f_e)},
        adjacency=adjacency,
        entity_vocab=vocab,
        user_ids=tuple(users),
        raw_adjacency=raw,
    )
    graph.check()
    return graph


def labels_of(records: Sequence[RawRecord]) -> np.ndarray:
    return np.array([r.label for r in records], dtype=np.int64)


# --------------------------------------------------------------------------
# synthetic corpora
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class SyntheticSpec:
    num_classes: int = 4
    texts_per_class: int = 200
    num_users: int = 100
    num_entities: int = 40
    signal_paths: tuple[str, ...] = ("TE", "TETE", "TETETE")
    noise_level: float = 0.1
    seed: int = 0
    entities_per_text: int = 3
    tokens_per_text: int = 12
    vocab_size: int = 400


def generate_synthetic(spec: SyntheticSpec):
    """Generate a labelled corpus whose class signal follows ``spec.signal_paths``.

    Relations used by a signal path are class-correlated: an ``E`` step makes
    entity mentions come from per-class entity clusters, a ``U`` step makes
    authorship come from per-class user clusters, and a path ending in ``T``
    or ``U`` makes the words of a text come from a per-class word cluster.
    Each signal draw is replaced by a uniform draw with probability
    ``noise_level``; relations no signal path uses are uniform throughout.

    Returns ``(records, planted)`` where ``planted`` is the list of parsed
    signal paths.
    """
    from lts.metapath import MetaPath  # local: metapath imports this module

    if spec.num_classes < 2:
        raise SpecError("num_classes must be at least 2")
    if spec.texts_per_class < 1:
        raise SpecError("texts_per_class must be at least 1")
    if spec.num_users < 1:
        raise SpecError("num_users must be at least 1")
    if not 0.0 <= spec.noise_level <= 1.0:
        raise SpecError("noise_level must lie in [0, 1]")
    try:
        planted = [MetaPath.parse(name) for name in spec.signal_paths]
    except ValueError as exc:
        raise SpecError(f"invalid signal path: {exc}") from None

    codes = set("".join(spec.signal_paths))
    entity_signal = "E" in codes
    user_signal = "U" in codes
    text_signal = any(p.node_seq[-1] in (T, U) for p in planted)
    if entity_signal and spec.num_entities < spec.num_classes:
        raise SpecError(
            f"num_entities ({spec.num_entities}) < num_classes ({spec.num_classes}) "
            "with entity signal requested")
    if user_signal and spec.num_users < spec.num_classes:
        raise SpecError(
            f"num_users ({spec.num_users}) < num_classes ({spec.num_classes}) "
            "with user signal requested")
    if spec.num_entities < 0 or spec.entities_per_text < 0:
        raise SpecError("entity counts must be non-negative")
    if spec.entities_per_text > 0 and spec.num_entities == 0:
        raise SpecError("entities_per_text > 0 needs num_entities > 0")
    if text_signal and spec.vocab_size < 2 * spec.num_classes:
        raise SpecError("vocab_size too small for a per-class word signal")

    rng = np.random.default_rng(spec.seed)
    C = spec.num_classes
    ent_clusters = np.array_split(np.arange(spec.num_entities), C)
    user_clusters = np.array_split(np.arange(spec.num_users), C)
    # first half of the vocabulary is shared, second half split per class
    half = spec.vocab_size // 2
    shared_words = np.arange(half)
    word_clusters = np.array_split(np.arange(half, spec.vocab_size), C)
    noise = spec.noise_level
    t0 = 1_600_000_000

    rows = []
    for c in range(C):
        for _ in range(spec.texts_per_class):
            ents = []
            for _ in range(spec.entities_per_text):
                if entity_signal and rng.random() >= noise:
                    ents.append(int(rng.choice(ent_clusters[c])))
                else:
                    ents.append(int(rng.integers(spec.num_entities)))
            if user_signal and rng.random() >= noise:
                user = int(rng.choice(user_clusters[c]))
            else:
                user = int(rng.integers(spec.num_users))
            words = []
            for _ in range(spec.tokens_per_text):
                if text_signal and rng.random() >= noise:
                    words.append(int(rng.choice(word_clusters[c])))
                else:
                    words.append(int(rng.choice(shared_words)))
            ts = t0 + int(rng.integers(30 * 86400))
            if rng.random() < 0.5:
                loc = (round(float(rng.uniform(-90, 90)), 4), round(float(rng.uniform(-180, 180)), 4))
            else:
                loc = None
            seen = dict.fromkeys(f"ent{e:04d}" for e in ents)
            rows.append((c, user, " ".join(f"w{w:04d}" for w in words), tuple(seen), ts, loc))

    order = rng.permutation(len(rows))
    records = []
    for new_id, i in enumerate(order):
        c, user, text, ents, ts, loc = rows[i]
        records.append(RawRecord(new_id, text, user, ents, ts, loc, c))
    return records, planted


def load_ground_truth(path: str | Path) -> list[str]:
    with open(path, encoding="utf-8") as fh:
        return [ln.strip() for ln in fh if ln.strip()]


def entity_class_table(records: Sequence[RawRecord], num_classes: int) -> np.ndarray:
    """Contingency table of entity mentions (rows) against class (columns)."""
    _, vocab = _index_nodes(records)
    table = np.zeros((len(vocab), num_classes), dtype=np.int64)
    for r in records:
        for e in r.entities:
            table[vocab[e], r.label] += 1
    return table

