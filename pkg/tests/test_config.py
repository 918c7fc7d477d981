import pytest

from lts.config import ConfigError, load_config, parse_config, run_config, synthetic_spec


def test_parse_types_and_comments():
    v = parse_config("k = 4  # sampled per epoch\nnorm = l2\nresidual = no\nsignal_paths = TE, TUT\n"
                     "gamma = 0.25\n")
    assert v == {"k": 4, "norm": "l2", "residual": False, "signal_paths": ("TE", "TUT"), "gamma": 0.25}


def test_unknown_key():
    with pytest.raises(ConfigError):
        parse_config("learning_rte = 0.1\n")


def test_bad_value():
    with pytest.raises(ConfigError):
        parse_config("k = four\n")


def test_relative_paths_follow_config_file(tmp_path):
    (tmp_path / "sub").mkdir()
    cfg = tmp_path / "sub" / "a.cfg"
    cfg.write_text("corpus = data.jsonl\nout_dir = /abs/out\n")
    v = load_config(cfg)
    assert v["corpus"] == str(tmp_path / "sub" / "data.jsonl")
    assert v["out_dir"] == "/abs/out"


def test_run_config_routes_keys():
    rc = run_config(parse_config("seed = 5\nhidden = 32\nembed_seed = 9\nstrategy = random\n"))
    assert rc.seed == 5 and rc.model.seed == 5 and rc.model.hidden == 32
    assert rc.embedder.seed == 9 and rc.strategy == "random"
    with pytest.raises(ConfigError):
        run_config({"strategy": "greedy"})


def test_synthetic_spec():
    s = synthetic_spec(parse_config("num_classes = 3\nseed = 2\nhidden = 4\n"))
    assert s.num_classes == 3 and s.seed == 2


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "nope.cfg")
