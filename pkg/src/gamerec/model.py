"""Embedding model: graph propagation, attention, fusion, loss, training.

Two propagation conventions coexist deliberately. The game-game graphs use
plain symmetric-normalized propagation without self-loops; the player-game
bipartite graph uses layers with explicit self-terms,

    e_u <- e_u / |N_u| + sum_i  w(u,i) * n(i) / (sqrt|N_u| sqrt|N_i|) * e_i
    e_i <- n(i) * e_i / |N_i| + sum_u  1 / (sqrt|N_i| sqrt|N_u|) * e_u,

where w is the combined (preference + popularity) edge weight and n the
popularity node weight. The final player representation comes from the
bipartite branch; the final game representation is a learned softmax blend
of the strict-graph, connectivity-graph and bipartite branches, optionally
refined with description embeddings. Everything runs in float64 on CPU;
training is single-threaded for bit reproducibility.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
import torch
from torch import nn

from .dataset import SplitDataset
from .graphs import BipartiteGraph, CategoryGraph
from .profiles import DescriptionFusion

CHECKPOINT_MAGIC = b"GAMEREC-CKPT-1\n"


@dataclass
class TrainConfig:
    d_shared: int = 64
    k_layers: int = 3
    sgc_layers: int = 1
    beta: float = 0.1
    m_nsr: float = 1.0
    lambda_norm: float = 1e-4
    learning_rate: float = 1e-3
    epochs: int = 50
    batch_size: int = 1024
    seed: int = 0
    alpha: float = 0.05
    quantile_mode: str = "algorithm"
    fusion_mode: str = "mlp"
    d_emb: int = 1024
    d_h: int = 256

    def validate(self):
        if self.k_layers < 1 or self.sgc_layers < 1:
            raise ValueError("layer counts must be >= 1")
        if not 0.0 <= self.beta * (self.k_layers - 1) < 1.0:
            raise ValueError(f"need 0 <= beta*(k-1) < 1, got beta={self.beta}, k={self.k_layers}")
        if self.beta < 0:
            raise ValueError("beta must be nonnegative")
        if self.m_nsr < 0:
            raise ValueError("m_nsr must be nonnegative")
        if self.d_shared < 1 or self.d_emb < 1 or self.d_h < 1:
            raise ValueError("dimensions must be positive")
        if self.batch_size < 1 or self.epochs < 0 or self.learning_rate < 0:
            raise ValueError("bad optimizer settings")
        if self.quantile_mode not in ("algorithm", "exact"):
            raise ValueError(f"unknown quantile mode {self.quantile_mode!r}")
        if self.fusion_mode not in ("mlp", "linear", "gated"):
            raise ValueError(f"unknown fusion mode {self.fusion_mode!r}")


@dataclass
class GraphBundle:
    strict_gd: CategoryGraph
    strict_gp: CategoryGraph
    strict_dp: CategoryGraph
    connectivity: CategoryGraph
    bipartite: BipartiteGraph


@dataclass
class WeightBundle:
    """Static propagation weights: combined per-edge weights aligned with
    the bipartite edge order, popularity node weights per game."""

    edge_weights: np.ndarray
    node_weights: np.ndarray


@dataclass
class PrgOutputs:
    """Description embeddings, one row per game / player."""

    game_desc: np.ndarray
    player_desc: np.ndarray


class TrainingDivergedError(RuntimeError):
    def __init__(self, epoch: int, log):
        super().__init__(f"non-finite loss at epoch {epoch}")
        self.epoch = epoch
        self.log = log


def _inv_sqrt(degrees: np.ndarray) -> np.ndarray:
    out = np.zeros(len(degrees), dtype=float)
    nz = degrees > 0
    out[nz] = 1.0 / np.sqrt(degrees[nz].astype(float))
    return out


def normalized_adjacency(graph: CategoryGraph) -> torch.Tensor:
    """Sparse D^{-1/2} A D^{-1/2} without self-loops; isolated nodes map
    to zero rows."""
    s = _inv_sqrt(graph.degrees)
    if len(graph.edges):
        a, b = graph.edges[:, 0], graph.edges[:, 1]
        rows = np.concatenate([a, b])
        cols = np.concatenate([b, a])
        vals = s[rows] * s[cols]
    else:
        rows = cols = np.zeros(0, dtype=np.int64)
        vals = np.zeros(0, dtype=float)
    idx = torch.from_numpy(np.stack([rows, cols]))
    return torch.sparse_coo_tensor(
        idx, torch.from_numpy(vals), (graph.n_games, graph.n_games), check_invariants=False
    ).coalesce()


def bipartite_propagation_matrix(
    bipartite: BipartiteGraph,
    edge_weights: np.ndarray,
    node_weights: np.ndarray,
) -> torch.Tensor:
    """One reweighted bipartite layer as a sparse (P+G) x (P+G) operator.

    Rows 0..P-1 are players, P..P+G-1 games. Self coefficients: 1/|N_u| for
    players, n(i)/|N_i| for games; degree-0 self coefficients are 0.
    """
    ew = np.asarray(edge_weights, dtype=float)
    nw = np.asarray(node_weights, dtype=float)
    if len(ew) != len(bipartite):
        raise ValueError("edge weights do not align with the bipartite edges")
    if len(nw) != bipartite.n_games:
        raise ValueError("node weights must have one entry per game")
    P, G = bipartite.n_players, bipartite.n_games
    su = _inv_sqrt(bipartite.player_degrees)
    si = _inv_sqrt(bipartite.game_degrees)
    rows, cols, vals = [], [], []
    pu = np.nonzero(bipartite.player_degrees > 0)[0]
    rows.append(pu)
    cols.append(pu)
    vals.append(1.0 / bipartite.player_degrees[pu].astype(float))
    pi = np.nonzero(bipartite.game_degrees > 0)[0]
    rows.append(P + pi)
    cols.append(P + pi)
    vals.append(nw[pi] / bipartite.game_degrees[pi].astype(float))
    if len(bipartite):
        u, i = bipartite.edges[:, 0], bipartite.edges[:, 1]
        rows.append(u)
        cols.append(P + i)
        vals.append(ew * nw[i] * su[u] * si[i])
        rows.append(P + i)
        cols.append(u)
        vals.append(si[i] * su[u])
    idx = torch.from_numpy(np.stack([np.concatenate(rows), np.concatenate(cols)]))
    return torch.sparse_coo_tensor(
        idx, torch.from_numpy(np.concatenate(vals)), (P + G, P + G), check_invariants=False
    ).coalesce()


def unit_propagation_matrix(n_nodes: int, edges: np.ndarray) -> torch.Tensor:
    """The reweighted layer with every weight at 1 on an arbitrary
    undirected graph: 1/deg self-term plus symmetric-normalized neighbors.
    Used by the smoothness diagnostics."""
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    deg = np.bincount(edges.ravel(), minlength=n_nodes).astype(np.int64)
    s = _inv_sqrt(deg)
    nz = np.nonzero(deg > 0)[0]
    rows = [nz]
    cols = [nz]
    vals = [1.0 / deg[nz].astype(float)]
    if len(edges):
        a, b = edges[:, 0], edges[:, 1]
        rows.extend([a, b])
        cols.extend([b, a])
        vals.extend([s[a] * s[b], s[b] * s[a]])
    idx = torch.from_numpy(np.stack([np.concatenate(rows), np.concatenate(cols)]))
    return torch.sparse_coo_tensor(
        idx, torch.from_numpy(np.concatenate(vals)), (n_nodes, n_nodes), check_invariants=False
    ).coalesce()


def penr_propagate(
    bipartite: BipartiteGraph,
    edge_weights: np.ndarray,
    node_weights: np.ndarray,
    e_u: torch.Tensor,
    e_i: torch.Tensor,
    k: int,
):
    """k reweighted bipartite layers; returns the k-th layer's player and
    game representations."""
    if k < 1:
        raise ValueError("need at least one layer")
    mat = bipartite_propagation_matrix(bipartite, edge_weights, node_weights)
    x = torch.cat([e_u, e_i], dim=0)
    for _ in range(k):
        x = torch.sparse.mm(mat, x)
    return x[: bipartite.n_players], x[bipartite.n_players :]


def lightgcn_propagate(graph, emb: torch.Tensor, layers: int) -> list:
    """Plain propagation (no feature transform, no nonlinearity): returns
    [input, layer 1, ..., layer `layers`]. `graph` may be a CategoryGraph
    or a precomputed sparse operator."""
    adj = graph if torch.is_tensor(graph) else normalized_adjacency(graph)
    if emb.shape[0] != adj.shape[0]:
        raise ValueError(f"embedding rows {emb.shape[0]} != graph nodes {adj.shape[0]}")
    out = [emb]
    x = emb
    for _ in range(layers):
        x = torch.sparse.mm(adj, x)
        out.append(x)
    return out


class AdditiveAttention(nn.Module):
    """Additive attention with a shared query: per row, channel c scores
    q . tanh(W e_c) and the output is the softmax-weighted channel blend."""

    def __init__(self, dim: int, init_std: float = 0.1):
        super().__init__()
        self.proj = nn.Parameter(torch.randn(dim, dim, dtype=torch.float64) * init_std)
        self.query = nn.Parameter(torch.randn(dim, dtype=torch.float64) * init_std)

    def forward(self, stack: torch.Tensor):
        # stack: (channels, rows, dim)
        scores = torch.tanh(stack @ self.proj.T) @ self.query
        weights = torch.softmax(scores, dim=0)
        return (weights.unsqueeze(-1) * stack).sum(dim=0), weights


def graphwise_attention(e_a: torch.Tensor, e_b: torch.Tensor, e_c: torch.Tensor, params: AdditiveAttention) -> torch.Tensor:
    """Per-game convex combination of three strict-graph embeddings."""
    if not (e_a.shape == e_b.shape == e_c.shape):
        raise ValueError("graphwise attention inputs must share a shape")
    combined, _ = params(torch.stack([e_a, e_b, e_c], dim=0))
    return combined


def layer_weights(k: int, beta: float) -> list:
    """w_l = 1 - (k - l) * beta for l = 1..k; deeper layers weigh more."""
    w = [1.0 - (k - l) * beta for l in range(1, k + 1)]
    if any(v <= 0.0 for v in w):
        raise ValueError(f"layer weights must stay positive; beta={beta}, k={k} gives {w}")
    return w


def layerwise_attention(layer_embs: Sequence[torch.Tensor], beta: float, params: AdditiveAttention) -> torch.Tensor:
    """Depth-reweighted attention over per-layer embeddings."""
    k = len(layer_embs)
    if k < 1:
        raise ValueError("need at least one layer embedding")
    w = layer_weights(k, beta)
    stack = torch.stack([w[l] * layer_embs[l] for l in range(k)], dim=0)
    combined, _ = params(stack)
    return combined


class FusionWeights(nn.Module):
    """Three logits whose softmax blends the game-embedding branches."""

    def __init__(self):
        super().__init__()
        self.logits = nn.Parameter(torch.zeros(3, dtype=torch.float64))

    def weights(self) -> torch.Tensor:
        return torch.softmax(self.logits, dim=0)


def fuse_item_embedding(e_ca: torch.Tensor, e_co: torch.Tensor, e_po: torch.Tensor, fusion: FusionWeights) -> torch.Tensor:
    if not (e_ca.shape == e_co.shape == e_po.shape):
        raise ValueError("fusion inputs must share a shape")
    w = fusion.weights()
    return w[0] * e_ca + w[1] * e_co + w[2] * e_po


def nsr_reweight(r, m: float):
    """Reweighted negative score m * sigmoid(r) * r."""
    t = torch.as_tensor(r, dtype=torch.float64) if not torch.is_tensor(r) else r
    out = m * torch.sigmoid(t) * t
    return float(out) if not torch.is_tensor(r) else out


def bpr_nsr_loss(scores_pos: torch.Tensor, scores_neg: torch.Tensor, m: float, lambda_norm: float, params=()) -> torch.Tensor:
    """Pairwise ranking loss with reweighted negatives plus an L2 term over
    all trainable parameters."""
    if scores_pos.shape != scores_neg.shape:
        raise ValueError("positive and negative scores must pair up")
    loss = -nn.functional.logsigmoid(scores_pos - nsr_reweight(scores_neg, m)).sum()
    if lambda_norm:
        reg = sum((p * p).sum() for p in params)
        loss = loss + lambda_norm * reg
    return loss


class RecommenderModel(nn.Module):
    """Full embedding model over one dataset's graphs and static weights."""

    def __init__(
        self,
        n_players: int,
        n_games: int,
        config: TrainConfig,
        graphs: GraphBundle,
        weights: WeightBundle,
        prg_outputs: Optional[PrgOutputs] = None,
    ):
        super().__init__()
        config.validate()
        torch.manual_seed(config.seed)
        self.n_players = n_players
        self.n_games = n_games
        self.config = config
        self.prg_enabled = prg_outputs is not None

        self.player_emb = nn.Parameter(torch.randn(n_players, config.d_shared, dtype=torch.float64) * 0.1)
        self.game_emb = nn.Parameter(torch.randn(n_games, config.d_shared, dtype=torch.float64) * 0.1)
        self.attn_category = AdditiveAttention(config.d_shared)
        self.attn_layer = AdditiveAttention(config.d_shared)
        self.fusion = FusionWeights()
        if self.prg_enabled:
            self.desc_fusion_game = DescriptionFusion(config.d_emb, config.d_h, config.d_shared, config.fusion_mode)
            self.desc_fusion_player = DescriptionFusion(config.d_emb, config.d_h, config.d_shared, config.fusion_mode)
            # One aligner serves both views; the integrators stay separate.
            self.desc_fusion_player.align_hidden = self.desc_fusion_game.align_hidden
            self.desc_fusion_player.align_out = self.desc_fusion_game.align_out
            self._game_desc = torch.from_numpy(np.asarray(prg_outputs.game_desc, dtype=float))
            self._player_desc = torch.from_numpy(np.asarray(prg_outputs.player_desc, dtype=float))
            if self._game_desc.shape != (n_games, config.d_emb):
                raise ValueError(f"game description matrix is {tuple(self._game_desc.shape)}, expected {(n_games, config.d_emb)}")
            if self._player_desc.shape != (n_players, config.d_emb):
                raise ValueError(f"player description matrix is {tuple(self._player_desc.shape)}, expected {(n_players, config.d_emb)}")

        self._adj_strict = [normalized_adjacency(g) for g in (graphs.strict_gd, graphs.strict_gp, graphs.strict_dp)]
        self._adj_connectivity = normalized_adjacency(graphs.connectivity)
        self._bip = bipartite_propagation_matrix(graphs.bipartite, weights.edge_weights, weights.node_weights)
        self.train_history = [set() for _ in range(n_players)]
        for u, i in graphs.bipartite.edges:
            self.train_history[int(u)].add(int(i))

    def compute_embeddings(self):
        """Forward pass: final (player, game) representations."""
        cfg = self.config
        strict_outs = []
        for adj in self._adj_strict:
            layers = lightgcn_propagate(adj, self.game_emb, cfg.sgc_layers)
            strict_outs.append(torch.stack(layers, dim=0).mean(dim=0))
        e_ca = graphwise_attention(*strict_outs, self.attn_category)

        co_layers = lightgcn_propagate(self._adj_connectivity, self.game_emb, cfg.k_layers)[1:]
        e_co = layerwise_attention(co_layers, cfg.beta, self.attn_layer)

        x = torch.cat([self.player_emb, self.game_emb], dim=0)
        for _ in range(cfg.k_layers):
            x = torch.sparse.mm(self._bip, x)
        e_u = x[: self.n_players]
        e_po = x[self.n_players :]

        e_i = fuse_item_embedding(e_ca, e_co, e_po, self.fusion)
        if self.prg_enabled:
            e_i = self.desc_fusion_game(e_i, self._game_desc)
            e_u = self.desc_fusion_player(e_u, self._player_desc)
        return e_u, e_i

    def scores(self) -> np.ndarray:
        """Dense player x game score matrix (no gradients)."""
        with torch.no_grad():
            e_u, e_i = self.compute_embeddings()
            return (e_u @ e_i.T).numpy()


def recommend_top_k(model: RecommenderModel, player: int, k: int, embeddings=None) -> list:
    """Top-k unseen games for one player, ties broken toward the lower game
    index; returns every candidate when k exceeds the candidate count."""
    if embeddings is None:
        with torch.no_grad():
            embeddings = model.compute_embeddings()
    e_u, e_i = embeddings
    scores = (e_i @ e_u[player]).detach().numpy()
    order = np.argsort(-scores, kind="stable")
    history = model.train_history[player]
    return [int(g) for g in order if int(g) not in history][:k]


def recommend_all(model: RecommenderModel, k: int) -> dict:
    """Top-k lists for every player, from one shared forward pass."""
    with torch.no_grad():
        embeddings = model.compute_embeddings()
    return {u: recommend_top_k(model, u, k, embeddings) for u in range(model.n_players)}


def _sample_negatives(rng: np.random.Generator, users: np.ndarray, history, n_games: int) -> np.ndarray:
    out = np.empty(len(users), dtype=np.int64)
    for k, u in enumerate(users):
        h = history[u]
        j = int(rng.integers(n_games))
        if len(h) < n_games:
            while j in h:
                j = int(rng.integers(n_games))
        out[k] = j
    return out


def train(
    config: TrainConfig,
    dataset: SplitDataset,
    graphs: GraphBundle,
    weights: WeightBundle,
    prg_outputs: Optional[PrgOutputs] = None,
    on_epoch: Optional[Callable[[dict], None]] = None,
):
    """Train on the dataset's train split with one uniform negative per
    positive per epoch. Deterministic for a fixed seed (single-threaded).
    Returns (model, per-epoch log)."""
    config.validate()
    torch.set_num_threads(1)
    table = dataset.train
    model = RecommenderModel(table.n_players, table.n_games, config, graphs, weights, prg_outputs)
    rng = np.random.default_rng(config.seed)
    optimizer = torch.optim.Adam(model.parameters(), lr=config.learning_rate)
    pos_u, pos_i = table.players, table.games
    log = []
    for epoch in range(config.epochs):
        perm = rng.permutation(len(pos_u))
        total = 0.0
        for start in range(0, len(perm), config.batch_size):
            batch = perm[start : start + config.batch_size]
            u = pos_u[batch]
            i = pos_i[batch]
            j = _sample_negatives(rng, u, model.train_history, table.n_games)
            optimizer.zero_grad()
            e_u, e_i = model.compute_embeddings()
            s_pos = (e_u[u] * e_i[i]).sum(dim=1)
            s_neg = (e_u[u] * e_i[j]).sum(dim=1)
            loss = bpr_nsr_loss(s_pos, s_neg, config.m_nsr, config.lambda_norm, model.parameters())
            if not torch.isfinite(loss):
                raise TrainingDivergedError(epoch, log)
            loss.backward()
            optimizer.step()
            total += float(loss.detach())
        entry = {"epoch": epoch, "loss_sum": total, "loss_per_pair": total / max(1, len(perm))}
        log.append(entry)
        if on_epoch is not None:
            on_epoch(entry)
    return model, log


def save_checkpoint(path, model: RecommenderModel, id_map_digest: str = ""):
    """Deterministic binary checkpoint: magic, JSON header (config, digest,
    array manifest), then raw little-endian float64 parameter data."""
    params = {name: p.detach().cpu().numpy().astype("<f8") for name, p in model.named_parameters()}
    names = sorted(params)
    header = {
        "config": asdict(model.config),
        "id_map_digest": id_map_digest,
        "prg_enabled": model.prg_enabled,
        "arrays": [{"name": n, "shape": list(params[n].shape)} for n in names],
    }
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        for n in names:
            fh.write(np.ascontiguousarray(params[n]).tobytes())


def read_checkpoint_header(path) -> dict:
    with open(path, "rb") as fh:
        magic = fh.read(len(CHECKPOINT_MAGIC))
        if magic != CHECKPOINT_MAGIC:
            raise ValueError(f"{path} is not a recognized checkpoint (bad magic)")
        (length,) = struct.unpack("<I", fh.read(4))
        return json.loads(fh.read(length).decode("utf-8"))


def load_checkpoint(
    path,
    graphs: GraphBundle,
    weights: WeightBundle,
    prg_outputs: Optional[PrgOutputs] = None,
    expected_id_map_digest: Optional[str] = None,
) -> RecommenderModel:
    """Rebuild a model from a checkpoint plus the (re-derived) graphs and
    static weights. A digest mismatch against the current id map is an
    error: the checkpoint indices would not mean the same entities."""
    with open(path, "rb") as fh:
        magic = fh.read(len(CHECKPOINT_MAGIC))
        if magic != CHECKPOINT_MAGIC:
            raise ValueError(f"{path} is not a recognized checkpoint (bad magic)")
        (length,) = struct.unpack("<I", fh.read(4))
        header = json.loads(fh.read(length).decode("utf-8"))
        if expected_id_map_digest is not None and header["id_map_digest"] != expected_id_map_digest:
            raise ValueError(
                f"id map digest mismatch: checkpoint {header['id_map_digest'][:12]} vs current {expected_id_map_digest[:12]}"
            )
        config = TrainConfig(**header["config"])
        if header.get("prg_enabled") and prg_outputs is None:
            raise ValueError("checkpoint was trained with description fusion; prg_outputs is required")
        bip = graphs.bipartite
        model = RecommenderModel(bip.n_players, bip.n_games, config, graphs, weights, prg_outputs if header.get("prg_enabled") else None)
        named = dict(model.named_parameters())
        manifest = {a["name"]: tuple(a["shape"]) for a in header["arrays"]}
        if set(named) != set(manifest):
            raise ValueError(f"checkpoint parameters {sorted(manifest)} do not match model {sorted(named)}")
        with torch.no_grad():
            for a in header["arrays"]:
                shape = tuple(a["shape"])
                count = int(np.prod(shape)) if shape else 1
                data = np.frombuffer(fh.read(count * 8), dtype="<f8").reshape(shape)
                named[a["name"]].copy_(torch.from_numpy(data.copy()))
    return model


def checkpoint_digest(path) -> str:
    return hashlib.sha256(open(path, "rb").read()).hexdigest()
