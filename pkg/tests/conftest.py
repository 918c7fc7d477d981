import numpy as np
import pytest

from lts.hin import RawRecord, SyntheticSpec, build_graph, generate_synthetic


def rec(i, text="", user=0, ents=(), ts=0, loc=None, label=0):
    return RawRecord(i, text, user, tuple(ents), ts, loc, label)


def random_records(seed, n_texts=40, n_users=12, n_entities=15, n_classes=3):
    """Small random corpus; some users and entities may end up isolated."""
    rng = np.random.default_rng(seed)
    out = []
    for i in range(n_texts):
        k = int(rng.integers(0, 4))
        ents = sorted({f"e{int(j)}" for j in rng.integers(0, n_entities, size=k)})
        words = " ".join(f"w{int(j)}" for j in rng.integers(0, 30, size=6))
        loc = None if rng.random() < 0.5 else (float(rng.uniform(-90, 90)), float(rng.uniform(-180, 180)))
        out.append(rec(i, words, int(rng.integers(0, n_users)), ents,
                       int(rng.integers(1_600_000_000, 1_600_900_000)), loc, int(rng.integers(0, n_classes))))
    return out


@pytest.fixture
def tiny_records():
    # 3 texts, 2 users, 2 entities; users 1 and 2 share entity "b"
    return [
        rec(0, "storm hits coast", 1, ("a", "b"), 1_600_000_000, (45.0, 90.0), 0),
        rec(1, "storm again", 1, ("a",), 1_600_086_400, None, 0),
        rec(2, "game night", 2, ("b",), 1_600_172_800, None, 1),
    ]


@pytest.fixture
def tiny_graph(tiny_records):
    return build_graph(tiny_records)


@pytest.fixture(scope="session")
def small_corpus():
    """Planted corpus small enough for unit tests of the training loop."""
    spec = SyntheticSpec(num_classes=3, texts_per_class=30, num_users=20, num_entities=15, seed=3)
    return generate_synthetic(spec)


# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[n])
