"""Signed preference edge weights, popularity weights, and their combination.

The preference weights follow a single pass over the bipartite edges: each
edge carries the mapped dwelling time t of its interaction and the mapped
average rating r of its game; when F = t^2/r^2 exceeds the F(1,1) upper
quantile the edge receives sign(t) times the information content
ln(2*pi) + t^2 + r^2, otherwise zero. Weights are computed once from static
history and never updated during training.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import stats
from .dataset import GameCatalog, InteractionTable, PopularityPartition
from .graphs import BipartiteGraph


@dataclass(frozen=True)
class EdgeWeightMap:
    """Per-edge weights aligned with a BipartiteGraph's edge order."""

    weights: np.ndarray
    alpha: float
    mode: str
    n_positive: int
    n_negative: int
    n_zero: int

    def __len__(self) -> int:
        return len(self.weights)


@dataclass(frozen=True)
class PopularityWeights:
    theta_e_hot: float
    theta_n_hot: float
    theta_n_cold: float
    partition: PopularityPartition
    edge_weight_by_game: np.ndarray
    node_weight_by_game: np.ndarray

    def edge_weights_for(self, bipartite: BipartiteGraph) -> np.ndarray:
        """Per-edge popularity weight (a function of the edge's game)."""
        return self.edge_weight_by_game[bipartite.edges[:, 1]]


def _counts(weights: np.ndarray):
    return int(np.sum(weights > 0)), int(np.sum(weights < 0)), int(np.sum(weights == 0))


def per_edge_weights(
    bipartite: BipartiteGraph,
    mapped_time: np.ndarray,
    mapped_rating: np.ndarray,
    alpha: float,
    mode: str = "algorithm",
    half_exponent: bool = False,
) -> EdgeWeightMap:
    """Preference-informed signed weight for every bipartite edge.

    mapped_time is per edge (standard-normal mapped dwelling times),
    mapped_rating per game (standard-normal mapped average ratings).
    """
    if not 0.0 < alpha < 0.5:
        raise ValueError(f"alpha must lie in (0, 0.5), got {alpha}")
    t = np.asarray(mapped_time, dtype=float)
    r_by_game = np.asarray(mapped_rating, dtype=float)
    if len(t) != len(bipartite):
        raise ValueError("mapped_time does not align with the edge list")
    if len(r_by_game) != bipartite.n_games:
        raise ValueError("mapped_rating must have one entry per game")
    q = stats.fisher_upper_quantile(alpha, mode)
    r = r_by_game[bipartite.edges[:, 1]] if len(bipartite) else np.zeros(0)
    f = t * t / np.maximum(r * r, stats.RATIO_EPS)
    sign = np.where(f > q, np.where(t > 0.0, 1.0, -1.0), 0.0)
    quad = t * t + r * r
    if half_exponent:
        quad = 0.5 * quad
    weights = sign * (stats.LOG_TWO_PI + quad)
    pos, neg, zero = _counts(weights)
    return EdgeWeightMap(weights=weights, alpha=alpha, mode=mode, n_positive=pos, n_negative=neg, n_zero=zero)


def penr_weights(
    partition: PopularityPartition,
    theta_e_hot: float = 5.0,
    theta_n_hot: float = 0.2,
    theta_n_cold: float = 6.0,
) -> PopularityWeights:
    """Popularity-guided weights: hot games get theta_e_hot on their out
    edges and theta_n_hot on their node, cold games theta_n_cold on their
    node; everything else stays at 1."""
    if theta_e_hot <= 0 or theta_n_hot <= 0 or theta_n_cold <= 0:
        raise ValueError("popularity weights must be positive")
    n = len(partition.player_count)
    edge_w = np.ones(n, dtype=float)
    node_w = np.ones(n, dtype=float)
    for g in partition.hot:
        edge_w[g] = theta_e_hot
        node_w[g] = theta_n_hot
    for g in partition.cold:
        node_w[g] = theta_n_cold
    return PopularityWeights(
        theta_e_hot=theta_e_hot,
        theta_n_hot=theta_n_hot,
        theta_n_cold=theta_n_cold,
        partition=partition,
        edge_weight_by_game=edge_w,
        node_weight_by_game=node_w,
    )


def combine_weights(per: EdgeWeightMap, penr_edge: np.ndarray) -> EdgeWeightMap:
    """Balance-oriented edge weight: elementwise preference + popularity."""
    penr_edge = np.asarray(penr_edge, dtype=float)
    if len(penr_edge) != len(per):
        raise ValueError("edge weight arrays have different lengths")
    combined = per.weights + penr_edge
    pos, neg, zero = _counts(combined)
    return EdgeWeightMap(weights=combined, alpha=per.alpha, mode=per.mode, n_positive=pos, n_negative=neg, n_zero=zero)


def preference_inputs(
    train: InteractionTable,
    catalog: GameCatalog,
    min_times: int = 3,
    normalization: str = "per_game",
):
    """Mapped dwelling time per training row and mapped rating per game.

    Dwelling times are shifted by +1 hour (zeros are legitimate) and mapped
    to standard-normal space per game; groups with fewer than `min_times`
    observations, or with no spread, stay at 0 so their edges are inert.
    Ratings are shifted by +1 and mapped globally over all games; missing
    ratings are substituted with the mean of the available ones first.
    normalization="per_player" groups dwelling times by player instead.
    """
    if normalization not in ("per_game", "per_player"):
        raise ValueError(f"unknown normalization {normalization!r}")
    mapped_time = np.zeros(len(train), dtype=float)
    groups = train.rows_by_game() if normalization == "per_game" else train.rows_by_player()
    for rows in groups:
        if len(rows) < min_times:
            continue
        sample = train.times[rows] + 1.0
        if np.ptp(sample) == 0.0:
            continue
        mapped_time[rows] = stats.to_standard_normal(sample).values

    mean_rating = catalog.mean_rating()
    ratings = np.asarray(
        [m.avg_rating if m.avg_rating is not None else mean_rating for m in catalog],
        dtype=float,
    )
    if len(ratings) != train.n_games:
        raise ValueError("catalog is not aligned with the interaction table")
    if len(ratings) >= min_times and np.ptp(ratings) > 0.0:
        mapped_rating = stats.to_standard_normal(ratings + 1.0).values
    else:
        mapped_rating = np.zeros(train.n_games, dtype=float)
    return mapped_time, mapped_rating


def dump_weight_audit(
    path,
    train: InteractionTable,
    per: EdgeWeightMap,
    penr_edge: np.ndarray,
    combined: Optional[EdgeWeightMap] = None,
):
    """Write `player_id game_id per_weight penr_edge combined` audit lines."""
    if combined is None:
        combined = combine_weights(per, penr_edge)
    with open(path, "w", encoding="utf-8") as fh:
        for row in range(len(train)):
            pid = train.player_ids[train.players[row]]
            gid = train.game_ids[train.games[row]]
            fh.write(
                f"{pid} {gid} {float(per.weights[row])!r} {float(penr_edge[row])!r} {float(combined.weights[row])!r}\n"
            )
