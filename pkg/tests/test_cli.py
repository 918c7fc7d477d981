import json

import pytest

from lts.cli import main
from lts.hin import load_corpus


@pytest.fixture
def workdir(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(
        "# tiny run\n"
        "corpus = corpus.jsonl\n"
        "out_dir = out\n"
        "num_classes = 3\n"
        "texts_per_class = 20\n"
        "num_users = 15\n"
        "num_entities = 12\n"
        "max_hops = 2\n"
        "k = 3\n"
        "top_k = 3\n"
        "inner_epochs = 2\n"
        "outer_budget = 2\n"
        "hidden = 8\n",
        encoding="utf-8")
    assert main(["synth", "--config", str(cfg), "--out", str(tmp_path / "corpus.jsonl")]) == 0
    return tmp_path, cfg


def test_synth_writes_corpus_and_truth(workdir):
    tmp, _ = workdir
    assert len(load_corpus(tmp / "corpus.jsonl")) == 60
    assert (tmp / "corpus.truth.txt").read_text().split() == ["TE", "TETE", "TETETE"]


def test_train_then_rank_and_ablate(workdir, capsys):
    tmp, cfg = workdir
    assert main(["train", "--config", str(cfg), "--seed", "3"]) == 0
    out = tmp / "out"
    for name in ("metrics.csv", "mu.csv", "ranked_paths.tsv", "model.ckpt", "state.json"):
        assert (out / name).is_file()
    assert json.loads((out / "state.json").read_text())["config"]["seed"] == 3
    capsys.readouterr()
    assert main(["rank", "--mu", str(out / "mu.csv"), "--checkpoint", str(out / "model.ckpt"),
                 "--top-k", "2"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    ranked = [ln.split("\t")[0] for ln in (out / "ranked_paths.tsv").read_text().splitlines()]
    assert lines[0] == "rank\tpath\tweight"
    assert [ln.split("\t")[1] for ln in lines[1:]] == ranked[:2]
    assert main(["ablate", "--config", str(cfg), "--seed", "3", "--level", "mild"]) == 0
    assert (out / "ablation.csv").read_text().startswith("level,removed_count")
    # 6 paths at 2 hops with top_k 3: removing 4 is not possible
    assert main(["ablate", "--config", str(cfg), "--seed", "3", "--level", "medium"]) == 2


def test_usage_errors(workdir, tmp_path):
    tmp, cfg = workdir
    assert main(["rank", "--mu", str(tmp / "missing.csv")]) == 2
    bad = tmp / "bad.cfg"
    bad.write_text("colour = blue\n")
    assert main(["train", "--config", str(bad)]) == 2
    assert main(["train", "--config", str(cfg), "--k", "99"]) != 0
    with pytest.raises(SystemExit):
        main(["train", "--strategy", "greedy"])


def test_corpus_errors_exit_2(tmp_path):
    (tmp_path / "c.jsonl").write_text("{broken\n")
    (tmp_path / "c.cfg").write_text("corpus = c.jsonl\n")
    assert main(["train", "--config", str(tmp_path / "c.cfg")]) == 2


def test_theory_commands(tmp_path, capsys):
    assert main(["theory", "t1", "--trials", "50", "--out-dir", str(tmp_path)]) == 0
    assert capsys.readouterr().out.strip().endswith("PASS")
    assert main(["theory", "t2", "--t", "20000", "--beta", "1.0"]) == 1
    assert (tmp_path / "theory_t1.csv").is_file()


def test_bench(workdir):
    tmp, cfg = workdir
    assert main(["bench", "1,2", "--config", str(cfg), "--budget", "1"]) == 0
    rows = (tmp / "out" / "hop_scaling.csv").read_text().splitlines()
    assert rows[0].startswith("hops,M") and len(rows) == 3
