import math
from collections import Counter

import numpy as np
import pytest

from gamerec import metrics
from gamerec.dataset import GameCatalog, GameMeta, PopularityPartition
from gamerec.metrics import (
    RecommendationSet,
    accuracy_metrics,
    category_coverage,
    category_entropy,
    conventional_coverage,
    full_report,
    report_lines,
    tail_metrics,
)

from conftest import random_catalog


def recs_of(lists, k):
    return RecommendationSet(lists={u: list(lst) for u, lst in lists.items()}, k=k)


# ----------------------------------------------------------- brute oracles
def brute_accuracy(lists, truth, k):
    """Straight-from-definition accuracy metrics."""
    users = [u for u, t in truth.items() if t]
    ndcg = recall = hit = prec = 0.0
    for u in users:
        lst = list(lists.get(u, []))[:k]
        rel = truth[u]
        dcg = 0.0
        for rank, g in enumerate(lst, start=1):
            if g in rel:
                dcg += 1.0 / math.log2(rank + 1)
        idcg = sum(1.0 / math.log2(r + 1) for r in range(1, min(k, len(rel)) + 1))
        ndcg += dcg / idcg if idcg else 0.0
        n_hits = len(set(lst) & rel)
        recall += n_hits / len(rel)
        hit += 1.0 if n_hits else 0.0
        prec += n_hits / k
    n = len(users)
    return ndcg / n, recall / n, hit / n, prec / n


# ------------------------------------------------------------------ accuracy
def test_accuracy_single_relevant_at_rank_two():
    recs = recs_of({0: [7, 3, 9, 1, 2]}, k=5)
    truth = {0: {3}}
    ndcg, recall, hit, precision = accuracy_metrics(recs, truth)
    assert ndcg == pytest.approx(1.0 / math.log2(3.0), abs=1e-12)
    assert recall == 1.0 and hit == 1.0
    assert precision == pytest.approx(0.2)


def test_accuracy_perfect_ranking():
    recs = recs_of({0: [1, 2, 3]}, k=3)
    truth = {0: {1, 2, 3}}
    ndcg, recall, hit, _ = accuracy_metrics(recs, truth)
    assert ndcg == pytest.approx(1.0) and recall == 1.0 and hit == 1.0


def test_accuracy_total_miss():
    recs = recs_of({0: [4, 5]}, k=2)
    truth = {0: {1}}
    assert accuracy_metrics(recs, truth) == (0.0, 0.0, 0.0, 0.0)


def test_accuracy_requires_evaluable_player():
    with pytest.raises(ValueError):
        accuracy_metrics(recs_of({0: [1]}, 1), {0: set()})


def test_accuracy_consistency_identity(rng):
    # precision * K == recall * |test| for single users when |test| <= K
    for _ in range(20):
        k = int(rng.integers(2, 8))
        n_rel = int(rng.integers(1, k + 1))
        rel = set(rng.choice(50, size=n_rel, replace=False).tolist())
        lst = rng.choice(50, size=k, replace=False).tolist()
        _, recall, _, precision = accuracy_metrics(recs_of({0: lst}, k), {0: rel})
        assert precision * k == pytest.approx(recall * n_rel, abs=1e-12)


# ------------------------------------------------------------------ coverage
def catalog_with(labels):
    entries = []
    for k, (genres, devs, pubs) in enumerate(labels):
        entries.append(
            GameMeta(
                game_id=f"game{k}", title=f"G{k}",
                genres=frozenset(genres), developers=frozenset(devs), publishers=frozenset(pubs),
            )
        )
    return GameCatalog(entries)


def test_conventional_coverage_union():
    cat = catalog_with([([], [], [])] * 4)
    recs = recs_of({0: [0, 1], 1: [1, 2]}, k=2)
    assert conventional_coverage(recs, cat) == pytest.approx(0.75)


def test_conventional_coverage_one_iff_every_game_listed():
    cat = catalog_with([([], [], [])] * 4)
    assert conventional_coverage(recs_of({0: [0, 1], 1: [2, 3]}, 2), cat) == 1.0
    assert conventional_coverage(recs_of({0: [0, 1], 1: [2, 0]}, 2), cat) < 1.0


def test_conventional_coverage_identical_lists():
    cat = catalog_with([([], [], [])] * 10)
    recs = recs_of({u: [0, 1, 2] for u in range(5)}, k=3)
    assert conventional_coverage(recs, cat) == pytest.approx(3 / 10)


def test_tail_metrics_basic():
    cat = catalog_with([([], [], [])] * 4)
    part = PopularityPartition(hot=frozenset(), cold=frozenset({0}), player_count=np.zeros(4))
    recs = recs_of({0: [0, 1]}, k=2)
    tail_cov, tail = tail_metrics(recs, cat, part)
    assert tail_cov == 1.0 and tail == pytest.approx(0.5)


def test_tail_metrics_no_tail_items_anywhere():
    cat = catalog_with([([], [], [])] * 4)
    part = PopularityPartition(hot=frozenset(), cold=frozenset({3}), player_count=np.zeros(4))
    recs = recs_of({0: [0, 1], 1: [1, 2]}, k=2)
    assert tail_metrics(recs, cat, part) == (0.0, 0.0)


def test_tail_metrics_empty_tail_set_errors():
    cat = catalog_with([([], [], [])] * 2)
    part = PopularityPartition(hot=frozenset(), cold=frozenset(), player_count=np.zeros(2))
    with pytest.raises(ValueError):
        tail_metrics(recs_of({0: [0]}, 1), cat, part)


def test_category_coverage_cases():
    cat = catalog_with([(["g1"], ["d1"], ["p1"]), (["g1"], ["d2"], ["p1"]), (["g2", "g3"], ["d1"], ["p2"])])
    assert category_coverage(recs_of({0: [0, 1]}, 2), cat, "genre") == pytest.approx(1.0)
    assert category_coverage(recs_of({0: [0, 2]}, 2), cat, "genre") == pytest.approx(3.0)
    with pytest.raises(ValueError):
        category_coverage(recs_of({0: [0]}, 1), cat, "franchise")


def test_category_coverage_total_is_sum(rng):
    cat = random_catalog(rng, 12)
    recs = recs_of({u: rng.choice(12, size=4, replace=False).tolist() for u in range(6)}, k=4)
    total = sum(category_coverage(recs, cat, c) for c in ("genre", "developer", "publisher"))
    assert category_coverage(recs, cat, "total") == pytest.approx(total, abs=1e-12)


def test_category_entropy_cases():
    cat = catalog_with([(["g1"], [], []), (["g1"], [], []), (["g2"], [], [])])
    assert category_entropy(recs_of({0: [0, 1]}, 2), cat, "genre") == pytest.approx(0.0)
    assert category_entropy(recs_of({0: [0, 2]}, 2), cat, "genre") == pytest.approx(math.log(2.0), abs=1e-12)


def test_metrics_match_brute_force_on_random_instances(rng):
    """Every metric equals an independent brute-force pass, 50 instances."""
    for trial in range(50):
        local = np.random.default_rng(trial)
        n_games = int(local.integers(5, 15))
        n_users = int(local.integers(2, 8))
        k = int(local.integers(1, 5))
        cat = random_catalog(local, n_games)
        lists = {u: local.choice(n_games, size=min(k, n_games), replace=False).tolist() for u in range(n_users)}
        truth = {u: set(local.choice(n_games, size=local.integers(1, 4), replace=False).tolist()) for u in range(n_users)}
        cold = frozenset(local.choice(n_games, size=max(1, n_games // 5), replace=False).tolist())
        part = PopularityPartition(hot=frozenset(), cold=cold, player_count=np.zeros(n_games))
        recs = recs_of(lists, k)

        got = accuracy_metrics(recs, truth)
        expected = brute_accuracy(lists, truth, k)
        assert np.allclose(got, expected, atol=1e-12)

        union = set()
        for lst in lists.values():
            union |= set(lst)
        assert conventional_coverage(recs, cat) == pytest.approx(len(union) / n_games, abs=1e-12)

        tail_cov, tail = tail_metrics(recs, cat, part)
        assert tail_cov == pytest.approx(len(union & cold) / len(cold), abs=1e-12)
        assert tail == pytest.approx(np.mean([len(set(l) & cold) / k for l in lists.values()]), abs=1e-12)

        for c, fieldname in (("genre", "genres"), ("developer", "developers"), ("publisher", "publishers")):
            cov_expected = np.mean(
                [len(set().union(*(getattr(cat.entries[g], fieldname) for g in lst))) for lst in lists.values()]
            )
            assert category_coverage(recs, cat, c) == pytest.approx(cov_expected, abs=1e-12)
            ents = []
            for lst in lists.values():
                counts = Counter()
                for g in lst:
                    counts.update(getattr(cat.entries[g], fieldname))
                total = sum(counts.values())
                ents.append(-sum((v / total) * math.log(v / total) for v in counts.values()) if total else 0.0)
            assert category_entropy(recs, cat, c) == pytest.approx(np.mean(ents), abs=1e-12)


# ------------------------------------------------------------ report object
def test_full_report_ranges_and_lines(rng):
    cat = random_catalog(rng, 10)
    lists = {u: rng.choice(10, size=3, replace=False).tolist() for u in range(4)}
    truth = {u: {int(rng.integers(10))} for u in range(4)}
    part = PopularityPartition(hot=frozenset({0}), cold=frozenset({8, 9}), player_count=np.zeros(10))
    report = full_report(recs_of(lists, 3), truth, cat, part)
    for rate in (report.ndcg, report.recall, report.hit, report.precision, report.conventional_coverage, report.tail_coverage, report.tail):
        assert 0.0 <= rate <= 1.0
    for c in ("genre", "developer", "publisher"):
        assert report.entropy[c] >= 0.0
    lines = report_lines(report)
    assert len(lines) == 7 + 4 + 3
    assert lines[0].startswith("ndcg@3 ")


def test_metrics_invariant_under_player_relabeling(rng):
    cat = random_catalog(rng, 10)
    lists = {u: rng.choice(10, size=3, replace=False).tolist() for u in range(5)}
    truth = {u: set(rng.choice(10, size=2, replace=False).tolist()) for u in range(5)}
    part = PopularityPartition(hot=frozenset(), cold=frozenset({0, 1}), player_count=np.zeros(10))
    base = full_report(recs_of(lists, 3), truth, cat, part)
    relabel = {u: u + 100 for u in lists}
    moved = full_report(
        recs_of({relabel[u]: lst for u, lst in lists.items()}, 3),
        {relabel[u]: t for u, t in truth.items()},
        cat,
        part,
    )
    assert metrics.report_to_dict(base) == metrics.report_to_dict(moved)
