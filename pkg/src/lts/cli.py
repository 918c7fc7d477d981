"""``lts`` command line.

Exit codes: 0 success, 1 runtime failure (aborted training, failed check),
2 usage or configuration error.
"""
from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from lts import importance, theory
from lts.backbone import load_checkpoint
from lts.config import ConfigError, load_config, run_config, synthetic_spec
from lts.hin import CorpusParseError, CorpusSchemaError, SpecError, generate_synthetic, write_corpus
from lts.metapath import enumerate_metapaths
from lts.trainer import (ABLATION_LEVELS, TrainingAborted, TrainResult, ablate, hop_scaling_bench,
                         prepare, run, write_csv, write_reports)

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _values(args) -> dict:
    values = load_config(args.config) if getattr(args, "config", None) else {}
    overrides = {
        "seed": getattr(args, "seed", None),
        "strategy": getattr(args, "strategy", None),
        "norm": getattr(args, "norm", None),
        "gamma": getattr(args, "gamma", None),
        "k": getattr(args, "k", None),
        "top_k": getattr(args, "top_k", None),
        "max_hops": getattr(args, "hops", None),
        "out_dir": getattr(args, "out_dir", None),
    }
    values.update({k: v for k, v in overrides.items() if v is not None})
    return values


def _corpus_path(values) -> Path:
    corpus = values.get("corpus")
    if not corpus:
        raise UsageError("no corpus path configured (key 'corpus')")
    path = Path(corpus)
    if not path.is_file():
        raise UsageError(f"corpus not found: {path}")
    return path


def _check_sizes(config) -> None:
    M = len(enumerate_metapaths(config.max_hops))
    for name in ("k", "top_k"):
        if getattr(config, name) > M:
            raise UsageError(f"{name}={getattr(config, name)} exceeds the {M} meta-paths of {config.max_hops} hops")


def _out_dir(values) -> Path:
    return Path(values.get("out_dir") or "lts_out")


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------

def cmd_synth(args) -> int:
    values = _values(args)
    spec = synthetic_spec(values)
    records, planted = generate_synthetic(spec)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_corpus(records, out)
    truth = out.with_suffix(".truth.txt")
    truth.write_text("".join(p.canonical_name + "\n" for p in planted), encoding="utf-8")
    print(f"wrote {len(records)} records to {out}")
    print(f"planted paths: {', '.join(p.canonical_name for p in planted)} ({truth})")
    return EXIT_OK


def cmd_train(args) -> int:
    values = _values(args)
    config = run_config(values)
    _check_sizes(config)
    corpus = _corpus_path(values)
    out = _out_dir(values)
    result = run(config, corpus, resume_from=args.resume)
    paths = write_reports(result, out)
    _print_summary(result, paths)
    return EXIT_OK


def _print_summary(result: TrainResult, paths) -> None:
    print(f"meta-paths: {len(result.catalog)} (max hops {result.config.max_hops}), "
          f"outer iterations: {result.iterations}, converged: {result.converged}")
    print("top paths:")
    for rank, m in enumerate(result.ranked, 1):
        print(f"  {rank:>2}  {result.catalog.names[m]:<10} {result.mu.mu[m]:.4f}")
    print(f"test Micro-F1: {result.test_micro_f1:.4f}")
    print(f"test Macro-F1: {result.test_macro_f1:.4f}")
    print(f"reports in {paths['metrics'].parent}")


def cmd_rank(args) -> int:
    for p in (args.mu, args.checkpoint):
        if p is not None and not Path(p).is_file():
            raise UsageError(f"file not found: {p}")
    if args.checkpoint is not None:
        load_checkpoint(args.checkpoint)  # validates the file
    names, traj = importance.read_trajectory(args.mu)
    mu = traj[-1]
    K = len(mu) if args.top_k is None else args.top_k
    if not 1 <= K <= len(mu):
        raise UsageError(f"--top-k must lie in [1, {len(mu)}]")
    print("rank\tpath\tweight")
    for rank, m in enumerate(importance.top_k(mu, K), 1):
        print(f"{rank}\t{names[m]}\t{mu[m]!r}")
    return EXIT_OK


def cmd_ablate(args) -> int:
    values = _values(args)
    config = run_config(values)
    run_dir = Path(args.run_dir) if args.run_dir else _out_dir(values)
    ckpt, mu_file = run_dir / "model.ckpt", run_dir / "mu.csv"
    for p in (ckpt, mu_file):
        if not p.is_file():
            raise UsageError(f"file not found: {p}")
    ctx = prepare(config, _corpus_path(values))
    model = load_checkpoint(ckpt)
    names, traj = importance.read_trajectory(mu_file)
    if names != ctx.catalog.names:
        raise UsageError("run directory was produced with a different meta-path catalog")
    mode, p = importance.parse_norm(config.norm)
    mu = importance.ImportanceVector(traj[-1], gamma=config.gamma, norm_mode=mode, p=p)
    ranked = importance.top_k(mu, config.top_k)
    result = TrainResult(model, mu, traj, ranked, float("nan"), float("nan"), float("nan"),
                         float("nan"), [], {}, ctx, config, False, None)
    levels = list(ABLATION_LEVELS) if args.level == "all" else [args.level]
    rows = []
    print("level\tremoved\tmicro_f1\tmacro_f1")
    for lv in levels:
        try:
            r = ablate(result, lv)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        rows.append((lv, r["level"], " ".join(r["removed"]), r["micro_f1"], r["macro_f1"]))
        print(f"{lv}\t{','.join(r['removed']) or '-'}\t{r['micro_f1']:.4f}\t{r['macro_f1']:.4f}")
    write_csv(run_dir / "ablation.csv", ("level", "removed_count", "removed", "micro_f1", "macro_f1"), rows)
    return EXIT_OK


def cmd_theory(args) -> int:
    seed = 666 if args.seed is None else args.seed
    if args.which == "t1":
        rep = theory.verify_theorem1(args.trials, args.m, seed)
        print(f"trials: {rep.trials}  M: {rep.M}")
        print(f"violations (comonotone): {rep.violations}")
        print(f"min margin E_MDS - E_Random: {rep.min_margin:.6g}")
        print(f"anti-comonotone counterexample margin: {rep.counterexample_margin:.6g}")
    else:
        mu = np.array([float(x) for x in args.mu.split(",")])
        rep = theory.verify_theorem2(mu, args.epsilon0, args.beta, args.t, seed, args.tolerance)
        print(f"draws: {rep.draws}  epsilon0: {args.epsilon0}  beta: {args.beta}")
        for j, (m, f) in enumerate(zip(rep.mu, rep.frequencies)):
            print(f"  path {j}: weight {m:.4f}  frequency {f:.5f}")
        print(f"max deviation: {rep.max_deviation:.5f} (tolerance {rep.tolerance})")
    print("PASS" if rep.passed else "FAIL")
    if args.out_dir:
        Path(args.out_dir).mkdir(parents=True, exist_ok=True)
        theory.write_report(Path(args.out_dir) / f"theory_{args.which}.csv", rep)
    return EXIT_OK if rep.passed else EXIT_RUNTIME


def cmd_bench(args) -> int:
    values = _values(args)
    config = run_config(values)
    try:
        hops = [int(h) for h in args.hops_list.split(",") if h.strip()]
    except ValueError:
        raise UsageError(f"bad hop list {args.hops_list!r}") from None
    if not hops:
        raise UsageError("empty hop list")
    _check_sizes(replace(config, max_hops=min(hops)))
    if args.budget is not None:
        config = replace(config, outer_budget=args.budget)
    rows = hop_scaling_bench(_corpus_path(values), hops, config)
    print("hops\tM\titerations/s\tmicro_f1\tmacro_f1")
    for r in rows:
        print(f"{r['hops']}\t{r['M']}\t{r['iterations_per_second']:.3f}\t{r['micro_f1']:.4f}\t{r['macro_f1']:.4f}")
    out = _out_dir(values)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(out / "hop_scaling.csv", ("hops", "M", "iterations", "iterations_per_second", "micro_f1", "macro_f1"),
              [[r[c] for c in ("hops", "M", "iterations", "iterations_per_second", "micro_f1", "macro_f1")]
               for r in rows])
    return EXIT_OK


# --------------------------------------------------------------------------
# parser
# --------------------------------------------------------------------------

def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key = value configuration file")
    p.add_argument("--seed", type=int)
    p.add_argument("--out-dir")


def _run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--strategy", choices=["random", "mds", "o-eps", "d-eps", "m-eps", "me-eps"])
    p.add_argument("--norm", help="softmax, l1 or l2")
    p.add_argument("--gamma", type=float)
    p.add_argument("--k", type=int, help="paths sampled per epoch")
    p.add_argument("--top-k", type=int, help="paths kept for final evaluation")
    p.add_argument("--hops", type=int, help="maximum meta-path length")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lts", description="Learning-to-sample meta-path engine")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic corpus with planted signal")
    _common(p)
    p.add_argument("--out", required=True, help="output JSONL path")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train and learn meta-path importance")
    _common(p)
    _run_flags(p)
    p.add_argument("--resume", help="run directory to resume from")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("rank", help="print the top-K paths of an importance snapshot")
    p.add_argument("--mu", required=True, help="mu.csv from a training run")
    p.add_argument("--checkpoint")
    p.add_argument("--top-k", type=int)
    p.set_defaults(func=cmd_rank)

    p = sub.add_parser("ablate", help="leave-out ablation of the top-ranked paths")
    _common(p)
    _run_flags(p)
    p.add_argument("--run-dir", help="directory written by 'train' (default: out_dir)")
    p.add_argument("--level", default="all", choices=list(ABLATION_LEVELS) + ["all"])
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("theory", help="Monte Carlo checks of the sampling results")
    p.add_argument("which", choices=["t1", "t2"])
    p.add_argument("--seed", type=int)
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--m", type=int, default=10)
    p.add_argument("--t", type=int, default=100_000, help="draws")
    p.add_argument("--mu", default="0.7,0.3")
    p.add_argument("--epsilon0", type=float, default=0.5)
    p.add_argument("--beta", type=float, default=0.99)
    p.add_argument("--tolerance", type=float, default=0.01)
    p.add_argument("--out-dir")
    p.set_defaults(func=cmd_theory)

    p = sub.add_parser("bench", help="hop-scaling throughput table")
    _common(p)
    _run_flags(p)
    p.add_argument("hops_list", metavar="HOPS", help="comma-separated hop bounds, e.g. 4,5,6,7")
    p.add_argument("--budget", type=int, help="outer iterations per hop setting")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, ConfigError, SpecError, CorpusParseError, CorpusSchemaError) as exc:
        print(f"lts {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except TrainingAborted as exc:
        print(f"lts {args.command}: training aborted: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
