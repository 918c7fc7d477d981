"""Alternating optimization: backbone training on sampled meta-paths, then
importance evaluation and update with the backbone frozen.
"""
from __future__ import annotations

import csv
import json
import logging
import time
import warnings
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from lts import importance
from lts.backbone import (BackboneModel, ModelConfig, NonFiniteLoss, load_checkpoint, predict,
                          save_checkpoint, train_step)
from lts.hin import EmbedderSpec, HeteroGraph, NodeType, RawRecord, build_graph, labels_of, load_corpus
from lts.importance import ImportanceVector
from lts.metapath import MetaPathCatalog, MetaPathFeatureSet, construct_all, enumerate_metapaths
from lts.metrics import macro_f1, micro_f1
from lts.sampling import SamplerState, SamplerStrategy, epsilon_at, sample_k

log = logging.getLogger(__name__)

ABLATION_LEVELS = {"none": 0, "mild": 2, "medium": 4, "strong": 6}


class TrainingAborted(RuntimeError):
    def __init__(self, iteration: int, msg: str):
        super().__init__(f"outer iteration {iteration}: {msg}")
        self.iteration = iteration


@dataclass(frozen=True)
class RunConfig:
    max_hops: int = 5
    k: int = 10
    inner_epochs: int = 10
    outer_budget: int | None = None      # None: model.epochs // inner_epochs
    convergence_tol: float = 1e-4
    convergence_window: int = 5
    train_frac: float = 0.7
    val_frac: float = 0.1
    test_frac: float = 0.2
    top_k: int = 10
    strategy: str = "m-eps"
    epsilon0: float = 0.5
    beta: float = 0.99
    gamma: float = 0.5
    norm: str = "l1"
    evaluate_all: bool = False
    sample_paths: bool = True            # False: every path active in every epoch
    seed: int = 666
    model: ModelConfig = field(default_factory=ModelConfig)
    embedder: EmbedderSpec = field(default_factory=EmbedderSpec)

    def __post_init__(self):
        fr = (self.train_frac, self.val_frac, self.test_frac)
        if min(fr) <= 0 or abs(sum(fr) - 1.0) > 1e-9:
            raise ValueError(f"split fractions must be positive and sum to 1, got {fr}")
        if self.k < 1 or self.top_k < 1:
            raise ValueError("k and top_k must be positive")
        SamplerStrategy.parse(self.strategy)
        importance.parse_norm(self.norm)

    @property
    def budget(self) -> int:
        if self.outer_budget is not None:
            return self.outer_budget
        return max(1, self.model.epochs // self.inner_epochs)


@dataclass
class Context:
    """Everything derived from (config, corpus) before training starts."""

    records: list[RawRecord]
    graph: HeteroGraph
    catalog: MetaPathCatalog
    features: MetaPathFeatureSet
    labels: np.ndarray
    num_classes: int
    train_idx: np.ndarray
    val_idx: np.ndarray
    test_idx: np.ndarray
    build_seconds: float = 0.0


@dataclass
class TrainResult:
    model: BackboneModel
    mu: ImportanceVector
    trajectory: list[np.ndarray]
    ranked: list[int]
    test_micro_f1: float
    test_macro_f1: float
    val_micro_f1: float
    val_macro_f1: float
    history: list[dict]
    timings: dict
    context: Context
    config: RunConfig
    converged: bool
    sampler: SamplerState
    streams: dict = field(repr=False, default_factory=dict)

    @property
    def catalog(self) -> MetaPathCatalog:
        return self.context.catalog

    @property
    def ranked_names(self) -> list[str]:
        return [self.catalog.names[i] for i in self.ranked]

    @property
    def iterations(self) -> int:
        return len(self.trajectory) - 1


# --------------------------------------------------------------------------
# data preparation
# --------------------------------------------------------------------------

def split(labels, fractions=(0.7, 0.1, 0.2), seed: int | np.random.Generator = 0):
    """Stratified train/val/test index split.

    Global sizes are ``round(f * n)`` for train and val with test taking the
    rest.  Within each class the members are shuffled and spread evenly over
    the global order, so every split receives its share of each class.
    """
    labels = np.asarray(labels)
    n = len(labels)
    f_train, f_val, f_test = fractions
    if min(fractions) <= 0 or abs(sum(fractions) - 1.0) > 1e-9:
        raise ValueError("fractions must be positive and sum to 1")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    n_train = int(round(f_train * n))
    n_val = int(round(f_val * n))
    n_val = min(n_val, n - n_train)

    position = np.empty(n)
    for c in np.unique(labels):
        members = np.flatnonzero(labels == c)
        members = members[rng.permutation(len(members))]
        offset = rng.random()
        position[members] = (np.arange(len(members)) + offset) / len(members)
    tiebreak = rng.random(n)
    order = np.lexsort((tiebreak, position))
    train = np.sort(order[:n_train])
    val = np.sort(order[n_train:n_train + n_val])
    test = np.sort(order[n_train + n_val:])

    missing = sorted(set(np.unique(labels)) - set(np.unique(labels[train])))
    if missing:
        warnings.warn(f"classes {missing} have no training members", stacklevel=2)
    return train, val, test


def _streams(seed: int) -> dict[str, np.random.Generator]:
    names = ("split", "sampler", "init", "dropout", "shuffle")
    children = np.random.SeedSequence(seed).spawn(len(names))
    return {n: np.random.default_rng(c) for n, c in zip(names, children)}


def _init_seed(seed: int) -> int:
    return int(np.random.SeedSequence(seed).spawn(5)[2].generate_state(1)[0])


def _records(corpus) -> list[RawRecord]:
    if isinstance(corpus, (str, Path)):
        return load_corpus(corpus)
    return list(corpus)


def prepare(config: RunConfig, corpus) -> Context:
    start = time.perf_counter()
    records = _records(corpus)
    if not records:
        raise ValueError("corpus is empty")
    graph = build_graph(records, config.embedder)
    catalog = enumerate_metapaths(config.max_hops)
    features = construct_all(graph, catalog)
    labels = labels_of(records)
    num_classes = int(labels.max()) + 1
    train, val, test = split(labels, (config.train_frac, config.val_frac, config.test_frac),
                             _streams(config.seed)["split"])
    return Context(records, graph, catalog, features, labels, num_classes, train, val, test,
                   time.perf_counter() - start)


def new_model(config: RunConfig, ctx: Context) -> BackboneModel:
    return BackboneModel(config.model, ctx.features.input_dims(), ctx.num_classes,
                         seed=_init_seed(config.seed),
                         n_entities=ctx.graph.node_counts[NodeType.Entity])


# --------------------------------------------------------------------------
# the two alternating phases
# --------------------------------------------------------------------------

def _batches(rows: np.ndarray, batch_size: int, rng: np.random.Generator):
    perm = rows[rng.permutation(len(rows))]
    chunks = [perm[i:i + batch_size] for i in range(0, len(perm), batch_size)]
    if len(chunks) > 1 and len(chunks[-1]) == 1:
        # a one-row batch has no usable batch statistics
        chunks[-2] = np.concatenate([chunks[-2], chunks[-1]])
        chunks.pop()
    return chunks


def backbone_phase(model: BackboneModel, ctx: Context, mu: ImportanceVector, sampler: SamplerState,
                   config: RunConfig, dropout_rng, shuffle_rng) -> tuple[list[float], list[list[int]]]:
    """``inner_epochs`` epochs, each on a freshly sampled path subset.  ``mu`` is read only."""
    M = len(ctx.catalog)
    losses, masks = [], []
    for _ in range(config.inner_epochs):
        if config.sample_paths:
            mask = sample_k(mu, config.k, sampler)
        else:
            mask = list(range(M))
        masks.append(mask)
        for rows in _batches(ctx.train_idx, config.model.batch_size, shuffle_rng):
            losses.append(train_step(model, ctx.features, (rows, ctx.labels[rows]), mu, mask, dropout_rng))
    return losses, masks


def mu_phase(model: BackboneModel, ctx: Context, mu: ImportanceVector,
             paths: Sequence[int]) -> tuple[ImportanceVector, dict[int, float]]:
    """Evaluate each path alone on validation, accumulate, normalize.  Model is read only."""
    model.eval()
    acc = {int(m): importance.evaluate_path(model, ctx.features, m, ctx.val_idx, ctx.labels, mu)
           for m in sorted(set(paths))}
    return importance.normalize(importance.update(mu, acc)), acc


def evaluate_mask(model: BackboneModel, ctx: Context, mu, mask: Sequence[int], rows) -> tuple[float, float]:
    pred = predict(model, ctx.features, mu, mask, rows=rows)
    gold = ctx.labels[rows]
    return micro_f1(pred, gold), macro_f1(pred, gold, ctx.num_classes)


# --------------------------------------------------------------------------
# outer loop
# --------------------------------------------------------------------------

def run(config: RunConfig, corpus, *, context: Context | None = None,
        resume_from: str | Path | None = None) -> TrainResult:
    """Train the backbone and learn path importance; see module docstring.

    Stops after ``config.budget`` outer iterations or once the L1 change of
    ``mu`` stays below ``convergence_tol`` for ``convergence_window``
    consecutive iterations.  ``resume_from`` continues a run whose reports
    were written by ``write_reports``.
    """
    ctx = context if context is not None else prepare(config, corpus)
    M = len(ctx.catalog)
    if config.k > M:
        raise ValueError(f"k={config.k} exceeds the number of meta-paths M={M}")
    if config.top_k > M:
        raise ValueError(f"top_k={config.top_k} exceeds M={M}")

    streams = _streams(config.seed)
    model = new_model(config, ctx)
    mu = importance.init(M, config.gamma, config.norm)
    sampler = SamplerState(config.strategy, config.epsilon0, config.beta, rng=streams["sampler"])
    trajectory = [mu.mu.copy()]
    history: list[dict] = []
    streak = 0
    timings = {"build_seconds": ctx.build_seconds, "backbone_seconds": [], "mu_seconds": []}

    if resume_from is not None:
        model, mu, trajectory, history, streak = _restore(resume_from, config, ctx, sampler, streams)

    converged = streak >= config.convergence_window
    loop_start = time.perf_counter()
    start_it = len(trajectory) - 1
    for it in range(start_it, config.budget):
        if converged:
            break
        t0 = time.perf_counter()
        mu_before = mu.mu.tobytes()
        try:
            losses, masks = backbone_phase(model, ctx, mu, sampler, config,
                                           streams["dropout"], streams["shuffle"])
        except NonFiniteLoss as exc:
            raise TrainingAborted(it + 1, str(exc)) from exc
        assert mu.mu.tobytes() == mu_before
        t1 = time.perf_counter()

        paths = range(M) if config.evaluate_all else sorted({m for mask in masks for m in mask})
        eps = epsilon_at(sampler)
        prev = mu
        mu, _ = mu_phase(model, ctx, mu, paths)
        sampler.advance()
        t2 = time.perf_counter()
        timings["backbone_seconds"].append(t1 - t0)
        timings["mu_seconds"].append(t2 - t1)

        change = float(np.abs(mu.mu - prev.mu).sum())
        streak = streak + 1 if change < config.convergence_tol else 0
        trajectory.append(mu.mu.copy())
        v_micro, v_macro = evaluate_mask(model, ctx, mu, importance.top_k(mu, config.top_k), ctx.val_idx)
        history.append({
            "iteration": it + 1,
            "epsilon": eps,
            "train_loss": float(np.mean(losses)),
            "evaluated_paths": len(paths),
            "mu_l1_change": change,
            "val_micro_f1": v_micro,
            "val_macro_f1": v_macro,
        })
        log.debug("iteration %d loss %.4f val micro %.4f", it + 1, history[-1]["train_loss"], v_micro)
        converged = streak >= config.convergence_window

    loop_seconds = time.perf_counter() - loop_start
    n_iter = len(timings["backbone_seconds"])
    timings["loop_seconds"] = loop_seconds
    timings["iterations_per_second"] = n_iter / loop_seconds if loop_seconds > 0 and n_iter else float("nan")

    ranked = importance.top_k(mu, config.top_k)
    model.eval()
    t_micro, t_macro = evaluate_mask(model, ctx, mu, ranked, ctx.test_idx)
    v_micro, v_macro = evaluate_mask(model, ctx, mu, ranked, ctx.val_idx)
    return TrainResult(model, mu, trajectory, ranked, t_micro, t_macro, v_micro, v_macro, history,
                       timings, ctx, config, converged, sampler, streams)


# --------------------------------------------------------------------------
# ablation and hop scaling
# --------------------------------------------------------------------------

def ablate(result: TrainResult, level: int | str, remove: Sequence[int] | None = None) -> dict:
    """Drop the ``level`` best-ranked paths from the selected set; validation F1.

    ``level`` may be a count or one of ``mild`` (2), ``medium`` (4),
    ``strong`` (6).  ``remove`` overrides it with explicit path indices.
    """
    n = ABLATION_LEVELS[level] if isinstance(level, str) else int(level)
    K = len(result.ranked)
    if remove is None:
        if n < 0 or n >= K:
            raise ValueError(f"ablation level {n} must be below top_K={K}")
        removed = result.ranked[:n]
    else:
        removed = [int(i) for i in remove]
    mask = [m for m in result.ranked if m not in set(removed)]
    micro, macro = evaluate_mask(result.model, result.context, result.mu, mask, result.context.val_idx)
    return {
        "level": n,
        "removed": [result.catalog.names[i] for i in removed],
        "micro_f1": micro,
        "macro_f1": macro,
    }


def hop_scaling_bench(corpus, hops_list: Sequence[int], config: RunConfig | None = None) -> list[dict]:
    """Run the full pipeline per hop bound; throughput counts outer iterations only."""
    if not hops_list:
        raise ValueError("hops_list is empty")
    config = config or RunConfig()
    records = _records(corpus)
    rows = []
    for h in hops_list:
        cfg = replace(config, max_hops=int(h))
        res = run(cfg, records)
        rows.append({
            "hops": int(h),
            "M": len(res.catalog),
            "iterations": res.iterations,
            "iterations_per_second": res.timings["iterations_per_second"],
            "micro_f1": res.test_micro_f1,
            "macro_f1": res.test_macro_f1,
        })
    return rows


# --------------------------------------------------------------------------
# reports and resume
# --------------------------------------------------------------------------

METRIC_COLUMNS = ("iteration", "epsilon", "train_loss", "evaluated_paths", "mu_l1_change",
                  "val_micro_f1", "val_macro_f1")


def _fmt(v):
    return repr(float(v)) if isinstance(v, (float, np.floating)) else str(v)


def write_csv(path: Path, header: Sequence[str], rows: Sequence[Sequence]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def write_ranked(path: Path, names: Sequence[str], weights: Sequence[float]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for n, wgt in zip(names, weights):
            fh.write(f"{n}\t{float(wgt)!r}\n")


def write_reports(result: TrainResult, out_dir: str | Path) -> dict[str, Path]:
    """Write every run artifact into ``out_dir``; returns name -> path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    names = result.catalog.names
    paths = {
        "metrics": out / "metrics.csv",
        "mu": out / "mu.csv",
        "ranked": out / "ranked_paths.tsv",
        "final": out / "final_metrics.csv",
        "timing": out / "timing.csv",
        "catalog": out / "catalog.txt",
        "checkpoint": out / "model.ckpt",
        "state": out / "state.json",
    }
    write_csv(paths["metrics"], METRIC_COLUMNS, [[h[c] for c in METRIC_COLUMNS] for h in result.history])
    importance.write_trajectory(paths["mu"], names, result.trajectory)
    write_ranked(paths["ranked"], result.ranked_names, result.mu.mu[result.ranked])
    write_csv(paths["final"], ("metric", "value"), [
        ("test_micro_f1", result.test_micro_f1),
        ("test_macro_f1", result.test_macro_f1),
        ("val_micro_f1", result.val_micro_f1),
        ("val_macro_f1", result.val_macro_f1),
        ("iterations", result.iterations),
        ("converged", int(result.converged)),
    ])
    t = result.timings
    timing_rows = [("build", "", t["build_seconds"])]
    timing_rows += [("backbone", i + 1, s) for i, s in enumerate(t["backbone_seconds"])]
    timing_rows += [("mu", i + 1, s) for i, s in enumerate(t["mu_seconds"])]
    timing_rows += [("loop", "", t["loop_seconds"])]
    write_csv(paths["timing"], ("phase", "iteration", "seconds"), timing_rows)
    result.catalog.save(paths["catalog"])
    save_checkpoint(result.model, paths["checkpoint"])
    state = {
        "config": _config_to_dict(result.config),
        "mu": [float(x) for x in result.mu.mu],
        "mu_t": result.mu.t,
        "sampler_t": result.sampler.t,
        "streak": _streak(result),
        "rng": {name: g.bit_generator.state for name, g in result.streams.items()},
        "history": result.history,
    }
    paths["state"].write_text(json.dumps(state, indent=1, sort_keys=True), encoding="utf-8")
    return paths


def _streak(result: TrainResult) -> int:
    n = 0
    for h in reversed(result.history):
        if h["mu_l1_change"] < result.config.convergence_tol:
            n += 1
        else:
            break
    return n


def _config_to_dict(config: RunConfig) -> dict:
    return asdict(config)


def _restore(run_dir, config: RunConfig, ctx: Context, sampler: SamplerState, streams):
    run_dir = Path(run_dir)
    state = json.loads((run_dir / "state.json").read_text(encoding="utf-8"))
    model = load_checkpoint(run_dir / "model.ckpt")
    names, trajectory = importance.read_trajectory(run_dir / "mu.csv")
    if names != ctx.catalog.names:
        raise ValueError("saved importance vector does not match the meta-path catalog")
    mode, p = importance.parse_norm(config.norm)
    mu = ImportanceVector(np.array(state["mu"]), gamma=config.gamma, norm_mode=mode, p=p, t=state["mu_t"])
    # mu.csv holds repr-formatted floats, exact on round trip
    trajectory[-1] = mu.mu.copy()
    sampler.t = state["sampler_t"]
    for name, st in state["rng"].items():
        streams[name].bit_generator.state = st
    return model, mu, trajectory, state["history"], state["streak"]
