import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from emoxling.corpus import EMOTIONS, Dataset, Example, LabelVector, PredictionMatrix, label_vector_from_names
from emoxling.errors import IdMismatch
from emoxling.metrics import EvalReport, evaluate, evaluate_arrays, jaccard_difference, jaccard_sample


def naive_scores(P, G):
    """Loop-and-set reference implementation of the three scores."""
    n = len(P)
    jac = 0.0
    for p, g in zip(P, G):
        ps = {k for k in range(11) if p[k]}
        gs = {k for k in range(11) if g[k]}
        jac += 1.0 if not (ps | gs) else len(ps & gs) / len(ps | gs)
    f1s, accs = [], []
    for k in range(11):
        tp = fp = fn = tn = 0
        for p, g in zip(P, G):
            if p[k] and g[k]:
                tp += 1
            elif p[k]:
                fp += 1
            elif g[k]:
                fn += 1
            else:
                tn += 1
        prec = tp / (tp + fp) if tp + fp else 0.0
        rec = tp / (tp + fn) if tp + fn else 0.0
        f1s.append(2 * prec * rec / (prec + rec) if prec + rec else 0.0)
        accs.append((tp + tn) / n)
    return jac / n, sum(f1s) / 11, sum(accs) / 11, f1s


def _dataset(G, ids=None):
    ids = ids or [f"e{i}" for i in range(len(G))]
    return Dataset("xx", "test", tuple(Example(i, "t", LabelVector.from_array(g)) for i, g in zip(ids, G)))


def _preds(P, ids=None):
    ids = ids or [f"e{i}" for i in range(len(P))]
    return PredictionMatrix(tuple(ids), np.asarray(P, dtype=float))


def test_jaccard_sample_examples():
    assert jaccard_sample(label_vector_from_names(["joy", "love"]),
                          label_vector_from_names(["joy", "optimism"])) == pytest.approx(1 / 3)
    v = label_vector_from_names(["fear"])
    assert jaccard_sample(v, v) == 1.0
    assert jaccard_sample(label_vector_from_names([]), label_vector_from_names([])) == 1.0


def test_hand_worked_fixture():
    P = [label_vector_from_names(["anger"]).as_array(), label_vector_from_names(["joy"]).as_array()]
    G = [label_vector_from_names(["anger", "fear"]).as_array(), label_vector_from_names(["joy"]).as_array()]
    r = evaluate(_preds(P), _dataset(G))
    assert r.jaccard == 0.75
    assert r.macro_f1 == pytest.approx(2 / 11, abs=1e-15)
    assert r.avg_accuracy == pytest.approx(21 / 22, abs=1e-15)
    f1 = dict(zip(EMOTIONS, r.per_class_f1))
    assert f1["anger"] == 1.0 and f1["joy"] == 1.0 and f1["fear"] == 0.0
    assert r.exact_match == 0.5


def test_perfect_and_all_false():
    rng = np.random.default_rng(0)
    G = rng.random((10, 11)) < 0.3
    r = evaluate_arrays(G, G)
    assert (r.jaccard, r.avg_accuracy) == (1.0, 1.0)
    Z = np.zeros((5, 11), dtype=bool)
    r = evaluate_arrays(Z, Z)
    assert (r.jaccard, r.macro_f1, r.avg_accuracy) == (1.0, 0.0, 1.0)


def test_random_pairs_match_reference():
    rng = np.random.default_rng(42)
    P = rng.random((1000, 11)) < 0.3
    G = rng.random((1000, 11)) < 0.3
    r = evaluate_arrays(P, G)
    j, f, a, per = naive_scores(P, G)
    assert abs(r.jaccard - j) <= 1e-12
    assert abs(r.macro_f1 - f) <= 1e-12
    assert abs(r.avg_accuracy - a) <= 1e-12
    assert np.allclose(r.per_class_f1, per, rtol=0, atol=1e-12)


def test_alignment_by_id():
    G = [[1] + [0] * 10, [0] * 11]
    P = [[0] * 11, [0.9] + [0] * 10]
    r = evaluate(_preds(P, ["b", "a"]), _dataset(G, ["a", "b"]))
    assert r.jaccard == 1.0
    with pytest.raises(IdMismatch):
        evaluate(_preds(P, ["a", "c"]), _dataset(G, ["a", "b"]))


def test_jaccard_difference_examples():
    G = np.array([[1] + [0] * 10, [0, 1] + [0] * 9])
    A = G.astype(float)
    B = np.array([[0, 0, 1] + [0] * 8, [0, 1] + [0] * 9], dtype=float)
    gold = _dataset(G)
    d = jaccard_difference(_preds(A), _preds(B), gold)
    assert d.tolist() == [1.0, 0.0]
    assert jaccard_difference(_preds(A), _preds(A), gold).tolist() == [0.0, 0.0]


def test_report_kv_round_trip():
    rng = np.random.default_rng(3)
    r = evaluate_arrays(rng.random((20, 11)) < 0.4, rng.random((20, 11)) < 0.4)
    assert EvalReport.from_kv(r.to_kv()) == r
    assert "J" in r.to_text()


_mat = st.integers(1, 25).flatmap(
    lambda n: st.tuples(
        st.lists(st.lists(st.booleans(), min_size=11, max_size=11), min_size=n, max_size=n),
        st.lists(st.lists(st.booleans(), min_size=11, max_size=11), min_size=n, max_size=n),
    )
)


@given(_mat, st.randoms(use_true_random=False))
def test_scores_bounded_and_order_free(pg, rnd):
    P, G = np.array(pg[0]), np.array(pg[1])
    r = evaluate_arrays(P, G)
    for v in (r.jaccard, r.macro_f1, r.avg_accuracy, r.exact_match, *r.per_class_f1):
        assert 0.0 <= v <= 1.0
    order = list(range(len(P)))
    rnd.shuffle(order)
    s = evaluate_arrays(P[order], G[order])
    assert s.per_class_f1 == r.per_class_f1
    assert s.jaccard == pytest.approx(r.jaccard, abs=1e-15)
    assert s.avg_accuracy == pytest.approx(r.avg_accuracy, abs=1e-15)
    cols = list(range(11))
    rnd.shuffle(cols)
    t = evaluate_arrays(P[:, cols], G[:, cols])
    assert t.macro_f1 == pytest.approx(r.macro_f1, abs=1e-15)


@given(_mat, _mat)
def test_jaccard_difference_antisymmetric(pg, other):
    P, G = np.array(pg[0], dtype=float), np.array(pg[1])
    Q = np.array(other[0][:len(P)] + pg[0][len(other[0]):], dtype=float)
    gold = _dataset(G)
    ab = jaccard_difference(_preds(P), _preds(Q), gold)
    ba = jaccard_difference(_preds(Q), _preds(P), gold)
    assert np.array_equal(ab, -ba)
