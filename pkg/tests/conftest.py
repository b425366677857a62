import numpy as np
import pytest

from gamerec.dataset import GameCatalog, GameMeta, InteractionTable


def random_catalog(rng, n_games, n_genres=5, n_devs=4, n_pubs=3, max_labels=2, rating_range=(20.0, 95.0)):
    """Synthetic catalog with random label sets and ratings."""
    entries = []
    for g in range(n_games):
        genres = frozenset(f"g{k}" for k in rng.choice(n_genres, size=rng.integers(1, max_labels + 1), replace=False))
        devs = frozenset(f"d{k}" for k in rng.choice(n_devs, size=rng.integers(1, max_labels + 1), replace=False))
        pubs = frozenset(f"p{k}" for k in rng.choice(n_pubs, size=rng.integers(1, max_labels + 1), replace=False))
        entries.append(
            GameMeta(
                game_id=f"game{g}",
                title=f"Game {g}",
                genres=genres,
                developers=devs,
                publishers=pubs,
                avg_rating=float(rng.uniform(*rating_range)),
            )
        )
    return GameCatalog(entries)


def random_interactions(rng, n_players, n_games, per_player=(3, 9), time_scale=40.0):
    """Random unique (player, game) rows; every game gets at least one row
    so game universes stay aligned with catalogs."""
    rows = []
    for u in range(n_players):
        count = int(rng.integers(*per_player))
        games = rng.choice(n_games, size=min(count, n_games), replace=False)
        for g in games:
            rows.append((f"p{u}", f"game{g}", float(rng.exponential(time_scale))))
    seen = {g for _, g, _ in rows}
    for g in range(n_games):
        gid = f"game{g}"
        if gid not in seen:
            u = int(rng.integers(n_players))
            rows.append((f"p{u}", gid, float(rng.exponential(time_scale))))
    table = InteractionTable.from_rows(rows)
    # reindex games to the canonical catalog order
    order = sorted(range(table.n_games), key=lambda k: int(table.game_ids[k][4:]))
    remap = np.empty(table.n_games, dtype=np.int64)
    for new, old in enumerate(order):
        remap[old] = new
    table.game_ids = [f"game{g}" for g in range(table.n_games)]
    table.game_index = {g: k for k, g in enumerate(table.game_ids)}
    table.games = remap[table.games]
    return table


@pytest.fixture
def rng():
    return np.random.default_rng(0)
