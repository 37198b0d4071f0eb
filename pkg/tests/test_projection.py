import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from emoxling.corpus import ParallelPair, PredictionMatrix
from emoxling.errors import IdMismatch
from emoxling.projection import ProjectionConfig, filter_report, project_labels


def _fixture(counts, seed=0):
    """One pair per entry of `counts`, each with exactly that many labels above 0.5."""
    rng = np.random.default_rng(seed)
    pairs, rows = [], []
    for i, c in enumerate(counts):
        pairs.append(ParallelPair(f"p{i}", f"source {i}", f"target  text {i} "))
        row = rng.uniform(0.0, 0.5, 11)
        row[rng.choice(11, size=c, replace=False)] = rng.uniform(0.51, 1.0, c)
        rows.append(row)
    return pairs, PredictionMatrix(tuple(p.pair_id for p in pairs), np.array(rows))


def test_rule_examples():
    pairs, preds = _fixture([4, 2])
    out = project_labels(pairs, preds, ProjectionConfig(3, "at_least"))
    assert out.ids == ["p0"]
    assert out.examples[0].labels.count() == 4
    assert out.examples[0].labels.bits == tuple(preds.decisions[0])
    assert out.split == "projected"


def test_config_validation():
    assert ProjectionConfig(comparison="more-than").comparison == "more_than"
    with pytest.raises(ValueError):
        ProjectionConfig(comparison="at_most")
    with pytest.raises(ValueError):
        ProjectionConfig(min_emotions=12)


def test_filter_report_examples():
    pairs, preds = _fixture([0, 0, 0])
    assert filter_report(pairs, preds).retention == 0.0
    pairs, preds = _fixture([11, 11])
    assert filter_report(pairs, preds).retention == 1.0
    pairs, preds = _fixture(list(range(12)))
    rep = filter_report(pairs, preds)
    assert rep.histogram == (1,) * 12 and sum(rep.histogram) == 12
    assert "retained: 9" in rep.to_text()


def test_counts_zero_to_eleven():
    pairs, preds = _fixture(list(range(12)) * 2)
    counts = preds.decisions.sum(axis=1)
    for comparison, keep in (("at_least", counts >= 3), ("more_than", counts > 3)):
        out = project_labels(pairs, preds, ProjectionConfig(3, comparison))
        assert out.ids == [p.pair_id for p, k in zip(pairs, keep) if k]
        assert filter_report(pairs, preds, ProjectionConfig(3, comparison)).retained == int(keep.sum())


def test_source_threshold_is_applied():
    pairs, preds = _fixture([3])
    low = project_labels(pairs, preds, ProjectionConfig(11, source_threshold=0.0))
    assert len(low) == 1 and low.examples[0].labels.count() == 11


def test_alignment_by_pair_id():
    pairs, preds = _fixture([5, 1])
    shuffled = PredictionMatrix(preds.example_ids[::-1], preds.probabilities[::-1])
    assert project_labels(pairs, shuffled).ids == ["p0"]
    with pytest.raises(IdMismatch):
        project_labels(pairs[:1], preds)


_counts = st.lists(st.integers(0, 11), min_size=1, max_size=30)


@given(_counts, st.integers(0, 11), st.sampled_from(["at_least", "more_than"]))
def test_projection_properties(counts, k, comparison):
    pairs, preds = _fixture(counts)
    cfg = ProjectionConfig(k, comparison)
    out = project_labels(pairs, preds, cfg)
    assert all(cfg.keeps(ex.labels.count()) for ex in out)
    by_id = {p.pair_id: p for p in pairs}
    assert all(ex.text == by_id[ex.id].target_text for ex in out)
    assert out.ids == [p.pair_id for p in pairs if p.pair_id in set(out.ids)]

    rep = filter_report(pairs, preds, cfg)
    assert sum(rep.histogram) == len(pairs) and rep.retained == len(out)

    strict = project_labels(pairs, preds, ProjectionConfig(k, "more_than"))
    loose = project_labels(pairs, preds, ProjectionConfig(k, "at_least"))
    assert set(strict.ids) <= set(loose.ids)


@given(_counts, st.sampled_from(["at_least", "more_than"]))
def test_retention_monotone(counts, comparison):
    pairs, preds = _fixture(counts)
    kept = [filter_report(pairs, preds, ProjectionConfig(k, comparison)).retention for k in range(12)]
    assert all(b <= a for a, b in zip(kept, kept[1:]))
