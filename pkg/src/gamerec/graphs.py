"""Game-game category graphs and the player-game bipartite graph.

Raw graphs connect games sharing at least one label of a single category;
strict graphs require overlap in two distinct categories; the connectivity
graph is the union of the three raw graphs. All graphs are simple and
undirected, stored as sorted adjacency lists with a parallel edge-index
array so per-edge weights can be attached by position.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .dataset import GameCatalog, InteractionTable

CATEGORY_FIELDS = {"genre": "genres", "developer": "developers", "publisher": "publishers"}


@dataclass
class CategoryGraph:
    n_games: int
    kind: str
    edges: np.ndarray  # (m, 2) int64, i < j per row, rows sorted
    neighbors: list  # per node, sorted int64 array
    incident_edges: list  # per node, edge indices parallel to neighbors
    degrees: np.ndarray

    def has_edge(self, a: int, b: int) -> bool:
        if a == b:
            return False
        lo, hi = min(a, b), max(a, b)
        pos = np.searchsorted(self.neighbors[lo], hi)
        return pos < len(self.neighbors[lo]) and self.neighbors[lo][pos] == hi

    def edge_set(self) -> set:
        return {(int(a), int(b)) for a, b in self.edges}


def _graph_from_pairs(n: int, pairs, kind: str) -> CategoryGraph:
    uniq = sorted({(a, b) if a < b else (b, a) for a, b in pairs if a != b})
    edges = np.asarray(uniq, dtype=np.int64).reshape(len(uniq), 2)
    nbrs = [[] for _ in range(n)]
    incid = [[] for _ in range(n)]
    for e, (a, b) in enumerate(uniq):
        nbrs[a].append(b)
        incid[a].append(e)
        nbrs[b].append(a)
        incid[b].append(e)
    neighbors, incident = [], []
    for v in range(n):
        order = np.argsort(np.asarray(nbrs[v], dtype=np.int64), kind="stable")
        neighbors.append(np.asarray(nbrs[v], dtype=np.int64)[order])
        incident.append(np.asarray(incid[v], dtype=np.int64)[order])
    degrees = np.asarray([len(a) for a in neighbors], dtype=np.int64)
    return CategoryGraph(n_games=n, kind=kind, edges=edges, neighbors=neighbors, incident_edges=incident, degrees=degrees)


def _category_pairs(catalog: GameCatalog, category: str) -> set:
    """Pairs of game indices whose label sets for `category` intersect.
    Empty label sets match nothing."""
    if category not in CATEGORY_FIELDS:
        raise ValueError(f"unknown category {category!r}; expected one of {sorted(CATEGORY_FIELDS)}")
    field = CATEGORY_FIELDS[category]
    by_label = {}
    for idx, meta in enumerate(catalog):
        for label in getattr(meta, field):
            by_label.setdefault(label, []).append(idx)
    pairs = set()
    for members in by_label.values():
        for k, a in enumerate(members):
            for b in members[k + 1 :]:
                pairs.add((a, b))
    return pairs


def build_raw_category_graph(catalog: GameCatalog, category: str) -> CategoryGraph:
    """Edge (i, j) iff the two games share a label in the given category."""
    if len(catalog) == 0:
        raise ValueError("catalog is empty")
    return _graph_from_pairs(len(catalog), _category_pairs(catalog, category), kind=f"raw({category})")


def build_strict_graph(catalog: GameCatalog, cat_a: str, cat_b: str) -> CategoryGraph:
    """Edge iff label sets intersect in both categories."""
    if cat_a == cat_b:
        raise ValueError("strict graph needs two distinct categories")
    if len(catalog) == 0:
        raise ValueError("catalog is empty")
    pairs = _category_pairs(catalog, cat_a) & _category_pairs(catalog, cat_b)
    return _graph_from_pairs(len(catalog), pairs, kind=f"strict({cat_a},{cat_b})")


def build_connectivity_graph(catalog: GameCatalog) -> CategoryGraph:
    """Union of the three raw graphs: one shared category suffices."""
    if len(catalog) == 0:
        raise ValueError("catalog is empty")
    pairs = set()
    for category in CATEGORY_FIELDS:
        pairs |= _category_pairs(catalog, category)
    return _graph_from_pairs(len(catalog), pairs, kind="connectivity")


@dataclass
class BipartiteGraph:
    n_players: int
    n_games: int
    edges: np.ndarray  # (m, 2) int64 rows (player_index, game_index), table order
    player_degrees: np.ndarray
    game_degrees: np.ndarray

    def __len__(self) -> int:
        return len(self.edges)


def build_bipartite_graph(train: InteractionTable) -> BipartiteGraph:
    """One edge per unique (player, game) pair, in table row order so
    per-edge weight arrays align with the training rows."""
    edges = np.stack([train.players, train.games], axis=1).astype(np.int64) if len(train) else np.zeros((0, 2), dtype=np.int64)
    return BipartiteGraph(
        n_players=train.n_players,
        n_games=train.n_games,
        edges=edges,
        player_degrees=np.bincount(train.players, minlength=train.n_players).astype(np.int64),
        game_degrees=np.bincount(train.games, minlength=train.n_games).astype(np.int64),
    )


def dump_edges(graph, path, weights: Optional[np.ndarray] = None):
    """Write `src dst [weight]` lines for external inspection."""
    edges = graph.edges
    if weights is not None and len(weights) != len(edges):
        raise ValueError("weight array does not align with the edge list")
    with open(path, "w", encoding="utf-8") as fh:
        for e, (a, b) in enumerate(edges):
            if weights is None:
                fh.write(f"{int(a)} {int(b)}\n")
            else:
                fh.write(f"{int(a)} {int(b)} {float(weights[e])!r}\n")
