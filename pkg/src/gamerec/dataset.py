"""Interaction and catalog ingestion, reproducible splits, popularity stats.

External ids are opaque strings; dense indices are assigned in first-seen
order and shared by all splits derived from one table, so a game keeps the
same index in train, valid and test.
"""

from __future__ import annotations

import csv
import datetime
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np


class ParseError(ValueError):
    """Malformed input row; carries the offending file and line number."""

    def __init__(self, path, line_no: int, message: str):
        super().__init__(f"{path}:{line_no}: {message}")
        self.path = str(path)
        self.line_no = line_no


class ValidationError(ValueError):
    """Row parsed but violates a domain invariant."""


@dataclass(frozen=True)
class GameMeta:
    game_id: str
    title: str
    genres: frozenset = frozenset()
    developers: frozenset = frozenset()
    publishers: frozenset = frozenset()
    avg_rating: Optional[float] = None
    price: Optional[float] = None
    release_date: Optional[datetime.date] = None


class InteractionTable:
    """Unique (player, game) interactions with dwelling time, as parallel
    arrays over dense indices. Read-only after construction."""

    def __init__(self, player_ids, game_ids, players, games, times):
        self.player_ids = list(player_ids)
        self.game_ids = list(game_ids)
        self.player_index = {p: k for k, p in enumerate(self.player_ids)}
        self.game_index = {g: k for k, g in enumerate(self.game_ids)}
        self.players = np.asarray(players, dtype=np.int64)
        self.games = np.asarray(games, dtype=np.int64)
        self.times = np.asarray(times, dtype=np.float64)
        if not (len(self.players) == len(self.games) == len(self.times)):
            raise ValueError("misaligned interaction columns")

    def __len__(self) -> int:
        return len(self.players)

    @property
    def n_players(self) -> int:
        return len(self.player_ids)

    @property
    def n_games(self) -> int:
        return len(self.game_ids)

    @classmethod
    def from_rows(cls, rows: Iterable[tuple]) -> "InteractionTable":
        """Build from (player_id, game_id, time) rows; duplicate pairs are
        merged by summing dwelling time, ids indexed in first-seen order."""
        player_ids, game_ids = [], []
        player_index, game_index = {}, {}
        pair_row = {}
        players, games, times = [], [], []
        for pid, gid, t in rows:
            if pid not in player_index:
                player_index[pid] = len(player_ids)
                player_ids.append(pid)
            if gid not in game_index:
                game_index[gid] = len(game_ids)
                game_ids.append(gid)
            u, i = player_index[pid], game_index[gid]
            key = (u, i)
            if key in pair_row:
                times[pair_row[key]] += t
            else:
                pair_row[key] = len(players)
                players.append(u)
                games.append(i)
                times.append(t)
        return cls(player_ids, game_ids, players, games, times)

    @classmethod
    def with_universe(cls, player_ids, game_ids, rows: Iterable[tuple]) -> "InteractionTable":
        """Build over a fixed id universe (rows must reference known ids and
        already be unique pairs); used when reloading persisted splits."""
        table = cls(player_ids, game_ids, [], [], [])
        players, games, times = [], [], []
        for pid, gid, t in rows:
            players.append(table.player_index[pid])
            games.append(table.game_index[gid])
            times.append(float(t))
        table.players = np.asarray(players, dtype=np.int64)
        table.games = np.asarray(games, dtype=np.int64)
        table.times = np.asarray(times, dtype=np.float64)
        return table

    def subset(self, row_indices) -> "InteractionTable":
        """Row subset sharing this table's id universe."""
        idx = np.asarray(row_indices, dtype=np.int64)
        out = InteractionTable.__new__(InteractionTable)
        out.player_ids = self.player_ids
        out.game_ids = self.game_ids
        out.player_index = self.player_index
        out.game_index = self.game_index
        out.players = self.players[idx]
        out.games = self.games[idx]
        out.times = self.times[idx]
        return out

    def game_player_counts(self) -> np.ndarray:
        """Distinct players per game (rows are unique pairs)."""
        return np.bincount(self.games, minlength=self.n_games).astype(np.int64)

    def rows_by_player(self):
        """List of row-index arrays, one per player, in table order."""
        order = [[] for _ in range(self.n_players)]
        for row, u in enumerate(self.players):
            order[u].append(row)
        return [np.asarray(r, dtype=np.int64) for r in order]

    def rows_by_game(self):
        order = [[] for _ in range(self.n_games)]
        for row, g in enumerate(self.games):
            order[g].append(row)
        return [np.asarray(r, dtype=np.int64) for r in order]


@dataclass(frozen=True)
class SplitDataset:
    train: InteractionTable
    valid: InteractionTable
    test: InteractionTable
    seed: int
    ratios: tuple = (0.8, 0.1, 0.1)


@dataclass(frozen=True)
class PopularityPartition:
    """Hot/cold game index sets by player count."""

    hot: frozenset
    cold: frozenset
    player_count: np.ndarray
    hot_frac: float = 0.2
    cold_frac: float = 0.2


def _parse_time(raw, path, line_no) -> float:
    try:
        t = float(raw)
    except (TypeError, ValueError):
        raise ParseError(path, line_no, f"dwelling_time is not a number: {raw!r}")
    if math.isnan(t):
        raise ParseError(path, line_no, "dwelling_time is NaN")
    if t < 0:
        raise ValidationError(f"{path}:{line_no}: negative dwelling_time {t}")
    return t


def _iter_interaction_rows(path: Path):
    if path.suffix.lower() in (".json", ".jsonl"):
        with open(path, encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    rec = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise ParseError(path, line_no, f"bad JSON: {exc}")
                try:
                    pid, gid = str(rec["player_id"]), str(rec["game_id"])
                    raw_t = rec["dwelling_time"]
                except (KeyError, TypeError):
                    raise ParseError(path, line_no, "missing player_id/game_id/dwelling_time")
                yield pid, gid, _parse_time(raw_t, path, line_no)
        return
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh, delimiter="\t" if path.suffix.lower() == ".tsv" else ",")
        header = next(reader, None)
        if header is None:
            raise ParseError(path, 1, "empty file")
        cols = [c.strip() for c in header]
        try:
            p_col, g_col, t_col = (cols.index(c) for c in ("player_id", "game_id", "dwelling_time"))
        except ValueError:
            raise ParseError(path, 1, f"header must name player_id, game_id, dwelling_time; got {cols}")
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(cols):
                raise ParseError(path, line_no, f"expected {len(cols)} fields, got {len(row)}")
            yield row[p_col], row[g_col], _parse_time(row[t_col], path, line_no)


def load_interactions(path) -> InteractionTable:
    """Load player-game interactions from CSV/TSV (with header) or JSONL."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    return InteractionTable.from_rows(_iter_interaction_rows(path))


def _labels(raw) -> frozenset:
    if raw is None:
        return frozenset()
    if isinstance(raw, str):
        return frozenset(s.strip() for s in raw.split("|") if s.strip())
    return frozenset(str(s) for s in raw)


def _optional_float(raw, path, line_no, name, lo=None, hi=None):
    if raw is None or raw == "":
        return None
    try:
        v = float(raw)
    except (TypeError, ValueError):
        raise ParseError(path, line_no, f"{name} is not a number: {raw!r}")
    if lo is not None and (v < lo or v > hi):
        raise ValidationError(f"{path}:{line_no}: {name}={v} outside [{lo}, {hi}]")
    return v


def _optional_date(raw, path, line_no):
    if raw is None or raw == "":
        return None
    try:
        return datetime.date.fromisoformat(str(raw))
    except ValueError:
        raise ParseError(path, line_no, f"release_date is not an ISO date: {raw!r}")


class GameCatalog:
    """Ordered game metadata; the entry order defines the game index space
    used by the category graphs."""

    def __init__(self, entries: Sequence[GameMeta]):
        self.entries = list(entries)
        self.by_id = {m.game_id: m for m in self.entries}

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def align(self, game_ids: Sequence[str]) -> "GameCatalog":
        """Reorder to a given game-id list; unknown ids become label-less
        placeholder entries (they form no category edges)."""
        out = []
        for gid in game_ids:
            meta = self.by_id.get(gid)
            out.append(meta if meta is not None else GameMeta(game_id=gid, title=gid))
        return GameCatalog(out)

    def mean_rating(self) -> float:
        vals = [m.avg_rating for m in self.entries if m.avg_rating is not None]
        return float(np.mean(vals)) if vals else 0.0


def load_catalog(path) -> GameCatalog:
    """Load game metadata from CSV (|-separated label lists) or JSONL."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    entries = []
    if path.suffix.lower() in (".json", ".jsonl"):
        with open(path, encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    rec = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise ParseError(path, line_no, f"bad JSON: {exc}")
                if "game_id" not in rec or "title" not in rec:
                    raise ParseError(path, line_no, "missing game_id or title")
                entries.append(
                    GameMeta(
                        game_id=str(rec["game_id"]),
                        title=str(rec["title"]),
                        genres=_labels(rec.get("genres")),
                        developers=_labels(rec.get("developers")),
                        publishers=_labels(rec.get("publishers")),
                        avg_rating=_optional_float(rec.get("avg_rating"), path, line_no, "avg_rating", 0.0, 100.0),
                        price=_optional_float(rec.get("price"), path, line_no, "price"),
                        release_date=_optional_date(rec.get("release_date"), path, line_no),
                    )
                )
        return GameCatalog(entries)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or "game_id" not in reader.fieldnames:
            raise ParseError(path, 1, "catalog header must include game_id")
        for line_no, rec in enumerate(reader, start=2):
            entries.append(
                GameMeta(
                    game_id=rec["game_id"],
                    title=rec.get("title") or rec["game_id"],
                    genres=_labels(rec.get("genres")),
                    developers=_labels(rec.get("developers")),
                    publishers=_labels(rec.get("publishers")),
                    avg_rating=_optional_float(rec.get("avg_rating"), path, line_no, "avg_rating", 0.0, 100.0),
                    price=_optional_float(rec.get("price"), path, line_no, "price"),
                    release_date=_optional_date(rec.get("release_date"), path, line_no),
                )
            )
    return GameCatalog(entries)


def _largest_remainder_counts(n: int, ratios: Sequence[float]) -> list:
    """Integer allocation of n rows to the ratios, largest remainder first.
    Remainder ties go to the later split (test before valid) so small users
    still contribute held-out evaluation data."""
    quotas = [r * n for r in ratios]
    base = [int(math.floor(q)) for q in quotas]
    left = n - sum(base)
    order = sorted(range(len(ratios)), key=lambda k: (-(quotas[k] - base[k]), -k))
    for k in order[:left]:
        base[k] += 1
    return base


def split_interactions(table: InteractionTable, ratios=(0.8, 0.1, 0.1), seed: int = 0) -> SplitDataset:
    """Per-player shuffled split. Players with fewer than 3 interactions go
    entirely to train so every training profile is nonempty. Deterministic
    for a fixed seed."""
    if len(table) == 0:
        raise ValueError("cannot split an empty interaction table")
    if len(ratios) != 3 or any(r <= 0 for r in ratios):
        raise ValueError(f"ratios must be three positive numbers, got {ratios}")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"ratios must sum to 1, got {sum(ratios)}")
    rng = np.random.default_rng(seed)
    masks = [np.zeros(len(table), dtype=bool) for _ in range(3)]
    for rows in table.rows_by_player():
        n = len(rows)
        if n == 0:
            continue
        if n < 3:
            masks[0][rows] = True
            continue
        shuffled = rows[rng.permutation(n)]
        n_tr, n_va, _ = _largest_remainder_counts(n, ratios)
        masks[0][shuffled[:n_tr]] = True
        masks[1][shuffled[n_tr : n_tr + n_va]] = True
        masks[2][shuffled[n_tr + n_va :]] = True
    parts = [table.subset(np.nonzero(m)[0]) for m in masks]
    return SplitDataset(train=parts[0], valid=parts[1], test=parts[2], seed=seed, ratios=tuple(ratios))


def top_ratio(table: InteractionTable, p: float) -> float:
    """TR(p): share of the total player-count mass captured by the
    top-ceil(p * |I|) games by player count. TR(1) = 1."""
    if not 0.0 < p <= 1.0:
        raise ValueError(f"p must lie in (0, 1], got {p}")
    counts = table.game_player_counts()
    total = counts.sum()
    if total == 0:
        raise ValueError("table has no interactions")
    k = math.ceil(p * table.n_games)
    top = np.sort(counts)[::-1][:k]
    return float(top.sum() / total)


def top_ratio_grid(table: InteractionTable, step: float = 0.1):
    """Rows (p, TR(p), dTR(p)) over the p = step..1.0 grid."""
    grid = []
    prev = 0.0
    n = round(1.0 / step)
    for j in range(1, n + 1):
        p = j * step
        tr = top_ratio(table, min(p, 1.0))
        grid.append((p, tr, tr - prev))
        prev = tr
    return grid


def popularity_partition(table: InteractionTable, hot_frac: float = 0.2, cold_frac: float = 0.2) -> PopularityPartition:
    """Top/bottom game-index sets by player count; ties break toward the
    lower game index. Cold is drawn from the complement of hot so the two
    sets stay disjoint even with heavily tied counts."""
    if hot_frac < 0 or cold_frac < 0 or hot_frac + cold_frac > 1.0:
        raise ValueError(f"need hot_frac, cold_frac >= 0 with sum <= 1, got {hot_frac}, {cold_frac}")
    counts = table.game_player_counts()
    n = table.n_games
    idx = np.arange(n)
    n_hot = math.ceil(hot_frac * n) if hot_frac > 0 else 0
    n_cold = math.ceil(cold_frac * n) if cold_frac > 0 else 0
    desc = np.lexsort((idx, -counts))
    hot = frozenset(int(g) for g in desc[:n_hot])
    asc = np.lexsort((idx, counts))
    remaining = [int(g) for g in asc if int(g) not in hot]
    cold = frozenset(remaining[: min(n_cold, len(remaining))])
    return PopularityPartition(hot=hot, cold=cold, player_count=counts, hot_frac=hot_frac, cold_frac=cold_frac)


def write_id_map(path, table: InteractionTable) -> str:
    """Persist the id maps as canonical JSON; returns its SHA-256 digest."""
    import hashlib

    payload = json.dumps(
        {"players": table.player_ids, "games": table.game_ids},
        sort_keys=True,
        separators=(",", ":"),
    )
    Path(path).write_text(payload, encoding="utf-8")
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def id_map_digest(path) -> str:
    import hashlib

    return hashlib.sha256(Path(path).read_bytes()).hexdigest()
