import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from sklearn.metrics import f1_score

from lts.metrics import confusion, macro_f1, micro_f1, per_class_f1


def test_two_class_by_hand():
    gold, pred = [0, 0, 1, 1], [0, 1, 1, 1]
    assert micro_f1(pred, gold) == pytest.approx(0.75)
    np.testing.assert_allclose(per_class_f1(pred, gold), [2 / 3, 4 / 5])
    assert macro_f1(pred, gold) == pytest.approx(11 / 15)


def test_confusion_layout():
    np.testing.assert_array_equal(confusion([0, 1, 1, 1], [0, 0, 1, 1]), [[1, 1], [0, 2]])


def test_perfect_and_absent_classes():
    assert macro_f1([0, 2, 2], [0, 2, 2]) == 1.0
    # class 1 declared but never seen scores zero
    assert macro_f1([0, 2, 2], [0, 2, 2], num_classes=3) == pytest.approx(2 / 3)


@pytest.mark.parametrize("pred,gold", [([], []), ([0, 1], [0])])
def test_bad_input(pred, gold):
    with pytest.raises(ValueError):
        micro_f1(pred, gold)


@settings(max_examples=300, deadline=None)
@given(data=st.data(), n=st.integers(1, 60), c=st.integers(1, 6))
def test_against_sklearn(data, n, c):
    gold = np.array(data.draw(st.lists(st.integers(0, c - 1), min_size=n, max_size=n)))
    pred = np.array(data.draw(st.lists(st.integers(0, c - 1), min_size=n, max_size=n)))
    assert micro_f1(pred, gold) == pytest.approx(f1_score(gold, pred, average="micro"))
    assert macro_f1(pred, gold) == pytest.approx(f1_score(gold, pred, average="macro", zero_division=0))
    assert macro_f1(pred, gold, c) == pytest.approx(
        f1_score(gold, pred, labels=list(range(c)), average="macro", zero_division=0))
