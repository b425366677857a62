"""Accuracy and diversity metrics over top-K recommendation lists.

Accuracy metrics average over players with a nonempty test set. Diversity
splits into global coverage (share of the catalog that appears in any
list), long-tail metrics against the bottom-20%-by-players game set, and
per-user category coverage/entropy where a multi-label game contributes
each of its labels once and entropies use the natural log.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .dataset import GameCatalog, InteractionTable, PopularityPartition
from .graphs import CATEGORY_FIELDS

CATEGORIES = ("genre", "developer", "publisher")


@dataclass(frozen=True)
class RecommendationSet:
    """Per-player ordered top-K lists (train items already excluded)."""

    lists: Mapping[int, Sequence[int]]
    k: int


@dataclass
class MetricReport:
    k: int
    ndcg: float
    recall: float
    hit: float
    precision: float
    conventional_coverage: float
    tail_coverage: float
    tail: float
    coverage: dict = field(default_factory=dict)
    entropy: dict = field(default_factory=dict)


def truth_from_table(table: InteractionTable) -> dict:
    """Player -> set of test game indices."""
    truth = {}
    for u, i in zip(table.players, table.games):
        truth.setdefault(int(u), set()).add(int(i))
    return truth


def accuracy_metrics(recs: RecommendationSet, truth: Mapping[int, set], k: int = None):
    """(ndcg, recall, hit, precision) with binary relevance, log2 discount,
    and the ideal DCG over min(K, |test_u|)."""
    k = recs.k if k is None else k
    if k < 1:
        raise ValueError("K must be >= 1")
    evaluable = [u for u, t in truth.items() if t]
    if not evaluable:
        raise ValueError("no player has a nonempty test set")
    ndcg = recall = hit = precision = 0.0
    for u in evaluable:
        relevant = truth[u]
        ranked = list(recs.lists.get(u, ()))[:k]
        hits = [r for r, g in enumerate(ranked) if g in relevant]
        dcg = sum(1.0 / math.log2(r + 2) for r in hits)
        ideal = sum(1.0 / math.log2(r + 2) for r in range(min(k, len(relevant))))
        ndcg += dcg / ideal if ideal > 0 else 0.0
        recall += len(hits) / len(relevant)
        hit += 1.0 if hits else 0.0
        precision += len(hits) / k
    n = len(evaluable)
    return ndcg / n, recall / n, hit / n, precision / n


def conventional_coverage(recs: RecommendationSet, catalog: GameCatalog) -> float:
    """Share of the catalog recommended to at least one player."""
    union = set()
    for lst in recs.lists.values():
        union.update(int(g) for g in lst)
    return len(union) / len(catalog)


def tail_metrics(recs: RecommendationSet, catalog: GameCatalog, partition: PopularityPartition):
    """(tail_coverage, tail): long-tail share of the recommended union, and
    the mean per-user long-tail fraction of the K-list."""
    tail_set = partition.cold
    if not tail_set:
        raise ValueError("the long-tail game set is empty")
    union = set()
    per_user = []
    for lst in recs.lists.values():
        games = [int(g) for g in lst]
        union.update(g for g in games if g in tail_set)
        per_user.append(sum(1 for g in games if g in tail_set) / recs.k)
    tail_cov = len(union) / len(tail_set)
    tail = float(np.mean(per_user)) if per_user else 0.0
    return tail_cov, tail


def _labels_of(catalog: GameCatalog, game: int, category: str) -> frozenset:
    return getattr(catalog.entries[game], CATEGORY_FIELDS[category])


def category_coverage(recs: RecommendationSet, catalog: GameCatalog, category: str) -> float:
    """Mean over users of the number of distinct labels in the K-list;
    "total" sums the three category coverages."""
    if category == "total":
        return sum(category_coverage(recs, catalog, c) for c in CATEGORIES)
    if category not in CATEGORIES:
        raise ValueError(f"unknown category {category!r}")
    vals = []
    for lst in recs.lists.values():
        labels = set()
        for g in lst:
            labels |= _labels_of(catalog, int(g), category)
        vals.append(len(labels))
    return float(np.mean(vals)) if vals else 0.0


def category_entropy(recs: RecommendationSet, catalog: GameCatalog, category: str) -> float:
    """Mean over users of the Shannon entropy (natural log) of the label
    frequency distribution inside the K-list."""
    if category not in CATEGORIES:
        raise ValueError(f"unknown category {category!r}")
    vals = []
    for lst in recs.lists.values():
        counts = Counter()
        for g in lst:
            counts.update(_labels_of(catalog, int(g), category))
        total = sum(counts.values())
        if total == 0:
            vals.append(0.0)
            continue
        ent = -sum((c / total) * math.log(c / total) for c in counts.values())
        vals.append(ent)
    return float(np.mean(vals)) if vals else 0.0


def full_report(
    recs: RecommendationSet,
    truth: Mapping[int, set],
    catalog: GameCatalog,
    partition: PopularityPartition,
) -> MetricReport:
    ndcg, recall, hit, precision = accuracy_metrics(recs, truth)
    tail_cov, tail = tail_metrics(recs, catalog, partition)
    return MetricReport(
        k=recs.k,
        ndcg=ndcg,
        recall=recall,
        hit=hit,
        precision=precision,
        conventional_coverage=conventional_coverage(recs, catalog),
        tail_coverage=tail_cov,
        tail=tail,
        coverage={c: category_coverage(recs, catalog, c) for c in CATEGORIES + ("total",)},
        entropy={c: category_entropy(recs, catalog, c) for c in CATEGORIES},
    )


def report_lines(report: MetricReport) -> list:
    """One metric per line, machine-greppable."""
    lines = [
        f"ndcg@{report.k} {report.ndcg:.6f}",
        f"recall@{report.k} {report.recall:.6f}",
        f"hit@{report.k} {report.hit:.6f}",
        f"precision@{report.k} {report.precision:.6f}",
        f"conventional_coverage@{report.k} {report.conventional_coverage:.6f}",
        f"tail_coverage@{report.k} {report.tail_coverage:.6f}",
        f"tail@{report.k} {report.tail:.6f}",
    ]
    for c in CATEGORIES + ("total",):
        lines.append(f"coverage_{c}@{report.k} {report.coverage[c]:.6f}")
    for c in CATEGORIES:
        lines.append(f"entropy_{c}@{report.k} {report.entropy[c]:.6f}")
    return lines


def report_to_dict(report: MetricReport) -> dict:
    return {
        "k": report.k,
        "ndcg": report.ndcg,
        "recall": report.recall,
        "hit": report.hit,
        "precision": report.precision,
        "conventional_coverage": report.conventional_coverage,
        "tail_coverage": report.tail_coverage,
        "tail": report.tail,
        "coverage": dict(report.coverage),
        "entropy": dict(report.entropy),
    }
