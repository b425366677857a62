"""Command-line pipeline: ingest, train, evaluate, analyze.

Every command is anchored on a YAML config (see config.py); flags override
file values. Commands are deterministic given config + seed when the
description pipeline runs in stub mode, and exit 0 only after their outputs
are written and re-validated.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from . import analysis, dataset, graphs, metrics, model, profiles, weighting
from .config import RunConfig, load_config

BUNDLE_DIR = "bundle"
SPLIT_NAMES = ("train", "valid", "test")


# --------------------------------------------------------------------------- #
# bundle I/O
# --------------------------------------------------------------------------- #
def _write_split_csv(path, table: dataset.InteractionTable):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["player_id", "game_id", "dwelling_time"])
        for row in range(len(table)):
            writer.writerow(
                [
                    table.player_ids[table.players[row]],
                    table.game_ids[table.games[row]],
                    repr(float(table.times[row])),
                ]
            )


def _read_split_csv(path, player_ids, game_ids) -> dataset.InteractionTable:
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        for rec in csv.DictReader(fh):
            rows.append((rec["player_id"], rec["game_id"], float(rec["dwelling_time"])))
    return dataset.InteractionTable.with_universe(player_ids, game_ids, rows)


@dataclass
class Bundle:
    split: dataset.SplitDataset
    partition: dataset.PopularityPartition
    id_map_digest: str
    manifest: dict
    player_ids: list
    game_ids: list


def load_bundle(out_dir) -> Bundle:
    bundle_dir = Path(out_dir) / BUNDLE_DIR
    if not bundle_dir.exists():
        raise FileNotFoundError(f"no dataset bundle under {bundle_dir}; run `gamerec ingest` first")
    manifest = json.loads((bundle_dir / "manifest.json").read_text(encoding="utf-8"))
    id_map = json.loads((bundle_dir / "id_map.json").read_text(encoding="utf-8"))
    digest = dataset.id_map_digest(bundle_dir / "id_map.json")
    players, games = id_map["players"], id_map["games"]
    tables = {name: _read_split_csv(bundle_dir / f"{name}.csv", players, games) for name in SPLIT_NAMES}
    pop = json.loads((bundle_dir / "popularity.json").read_text(encoding="utf-8"))
    game_index = {g: k for k, g in enumerate(games)}
    partition = dataset.PopularityPartition(
        hot=frozenset(game_index[g] for g in pop["hot"]),
        cold=frozenset(game_index[g] for g in pop["cold"]),
        player_count=np.asarray([pop["player_count"][g] for g in games], dtype=np.int64),
        hot_frac=pop["hot_frac"],
        cold_frac=pop["cold_frac"],
    )
    split = dataset.SplitDataset(
        train=tables["train"],
        valid=tables["valid"],
        test=tables["test"],
        seed=manifest["seed"],
        ratios=tuple(manifest["ratios"]),
    )
    return Bundle(split=split, partition=partition, id_map_digest=digest, manifest=manifest, player_ids=players, game_ids=games)


def cmd_ingest(cfg: RunConfig) -> int:
    cfg.validate()
    out = Path(cfg.out_dir)
    bundle_dir = out / BUNDLE_DIR
    bundle_dir.mkdir(parents=True, exist_ok=True)

    table = dataset.load_interactions(cfg.data.interactions)
    dataset.load_catalog(cfg.data.catalog)  # fail early on a broken catalog
    split = dataset.split_interactions(table, cfg.split.ratios, cfg.split.seed)
    partition = dataset.popularity_partition(table, cfg.popularity.hot_frac, cfg.popularity.cold_frac)

    digest = dataset.write_id_map(bundle_dir / "id_map.json", table)
    for name, part in zip(SPLIT_NAMES, (split.train, split.valid, split.test)):
        _write_split_csv(bundle_dir / f"{name}.csv", part)
    popularity = {
        "hot": sorted(table.game_ids[g] for g in partition.hot),
        "cold": sorted(table.game_ids[g] for g in partition.cold),
        "player_count": {table.game_ids[g]: int(c) for g, c in enumerate(partition.player_count)},
        "hot_frac": cfg.popularity.hot_frac,
        "cold_frac": cfg.popularity.cold_frac,
    }
    (bundle_dir / "popularity.json").write_text(json.dumps(popularity, sort_keys=True, separators=(",", ":")), encoding="utf-8")
    manifest = {
        "version": 1,
        "seed": cfg.split.seed,
        "ratios": list(cfg.split.ratios),
        "interactions": str(cfg.data.interactions),
        "catalog": str(cfg.data.catalog),
        "id_map_digest": digest,
        "rows": {name: len(part) for name, part in zip(SPLIT_NAMES, (split.train, split.valid, split.test))},
    }
    (bundle_dir / "manifest.json").write_text(json.dumps(manifest, sort_keys=True, separators=(",", ":")), encoding="utf-8")

    loaded = load_bundle(out)  # validation pass
    total = sum(len(t) for t in (loaded.split.train, loaded.split.valid, loaded.split.test))
    if total != len(table):
        raise RuntimeError(f"bundle validation failed: {total} rows reloaded, expected {len(table)}")
    print(f"ingested {len(table)} interactions -> {bundle_dir} (train/valid/test = {manifest['rows']})")
    return 0


# --------------------------------------------------------------------------- #
# shared train/evaluate preparation
# --------------------------------------------------------------------------- #
@dataclass
class PipelineInputs:
    graphs: model.GraphBundle
    weights: model.WeightBundle
    per_map: weighting.EdgeWeightMap
    penr_edge: np.ndarray
    prg_outputs: Optional[model.PrgOutputs]
    catalog: dataset.GameCatalog
    mapped_time: np.ndarray
    mapped_rating: np.ndarray


def _zero_per_map(n_edges: int, mode: str) -> weighting.EdgeWeightMap:
    return weighting.EdgeWeightMap(
        weights=np.zeros(n_edges), alpha=0.0, mode=mode, n_positive=0, n_negative=0, n_zero=n_edges
    )


def _map_bounded(fn, items, bound: int):
    items = list(items)
    if bound <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=bound) as pool:
        return list(pool.map(fn, items))


def _build_prg(cfg: RunConfig, catalog, train_table, mapped_time, mapped_rating) -> model.PrgOutputs:
    if cfg.prg.mode == "stub":
        gen = profiles.StubGenerationClient()
        emb = profiles.StubEmbeddingClient(cfg.train.d_emb)
    else:
        gen = profiles.HttpGenerationClient(cfg.prg.generation_endpoint, cfg.prg.model, cfg.prg.timeout, cfg.prg.retries)
        emb = profiles.HttpEmbeddingClient(cfg.prg.embedding_endpoint, cfg.train.d_emb, cfg.prg.model, cfg.prg.timeout, cfg.prg.retries)
    cache_path = cfg.prg.cache or str(Path(cfg.out_dir) / "prg_cache.jsonl")
    cache = profiles.DescriptionCache(cache_path)

    mean_rating = catalog.mean_rating()
    game_prompts = [profiles.build_game_prompt(meta, mean_rating) for meta in catalog]
    game_texts = _map_bounded(lambda p: profiles.generate_description(gen, p, cache), game_prompts, cfg.prg.max_in_flight)
    game_vecs = np.stack(_map_bounded(lambda t: profiles.embed_text(emb, t), game_texts, cfg.prg.max_in_flight))

    player_vecs = np.zeros((train_table.n_players, cfg.train.d_emb))
    player_prompts = {}
    for u, rows in enumerate(train_table.rows_by_player()):
        if len(rows) == 0:
            continue  # no training history, keep the zero profile row
        history = [
            (game_texts[g], float(mapped_time[row]), float(mapped_rating[g]))
            for row, g in zip(rows, train_table.games[rows])
        ]
        player_prompts[u] = profiles.build_player_prompt(history)
    order = sorted(player_prompts)
    texts = _map_bounded(lambda u: profiles.generate_description(gen, player_prompts[u], cache), order, cfg.prg.max_in_flight)
    vecs = _map_bounded(lambda t: profiles.embed_text(emb, t), texts, cfg.prg.max_in_flight)
    for u, v in zip(order, vecs):
        player_vecs[u] = v
    return model.PrgOutputs(game_desc=game_vecs, player_desc=player_vecs)


def prepare_pipeline(cfg: RunConfig, bundle: Bundle) -> PipelineInputs:
    catalog = dataset.load_catalog(cfg.data.catalog).align(bundle.game_ids)
    train_table = bundle.split.train
    bip = graphs.build_bipartite_graph(train_table)
    graph_bundle = model.GraphBundle(
        strict_gd=graphs.build_strict_graph(catalog, "genre", "developer"),
        strict_gp=graphs.build_strict_graph(catalog, "genre", "publisher"),
        strict_dp=graphs.build_strict_graph(catalog, "developer", "publisher"),
        connectivity=graphs.build_connectivity_graph(catalog),
        bipartite=bip,
    )
    mapped_time, mapped_rating = weighting.preference_inputs(
        train_table, catalog, min_times=cfg.per.min_times, normalization=cfg.per.normalization
    )
    if cfg.per.alpha > 0.0:
        per_map = weighting.per_edge_weights(
            bip, mapped_time, mapped_rating, cfg.per.alpha, cfg.per.quantile_mode, cfg.per.half_exponent
        )
    else:
        per_map = _zero_per_map(len(bip), cfg.per.quantile_mode)
    pop_weights = weighting.penr_weights(bundle.partition, cfg.penr.edge_hot, cfg.penr.node_hot, cfg.penr.node_cold)
    penr_edge = pop_weights.edge_weights_for(bip)
    combined = weighting.combine_weights(per_map, penr_edge)
    weight_bundle = model.WeightBundle(edge_weights=combined.weights, node_weights=pop_weights.node_weight_by_game)
    prg_outputs = None
    if cfg.prg.mode != "off":
        prg_outputs = _build_prg(cfg, catalog, train_table, mapped_time, mapped_rating)
    return PipelineInputs(
        graphs=graph_bundle,
        weights=weight_bundle,
        per_map=per_map,
        penr_edge=penr_edge,
        prg_outputs=prg_outputs,
        catalog=catalog,
        mapped_time=mapped_time,
        mapped_rating=mapped_rating,
    )


def cmd_train(cfg: RunConfig) -> int:
    cfg.validate(need_data=False)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    bundle = load_bundle(out)
    inputs = prepare_pipeline(cfg, bundle)

    log_path = out / "train_log.jsonl"
    checkpoint_path = out / "checkpoint.bin"
    with open(log_path, "w", encoding="utf-8") as fh:

        def on_epoch(entry):
            fh.write(json.dumps(entry, sort_keys=True) + "\n")
            fh.flush()

        try:
            trained, log = model.train(
                cfg.train, bundle.split, inputs.graphs, inputs.weights, inputs.prg_outputs, on_epoch=on_epoch
            )
        except model.TrainingDivergedError as exc:
            print(f"training aborted: {exc} (partial log kept at {log_path})", file=sys.stderr)
            return 3

    model.save_checkpoint(checkpoint_path, trained, bundle.id_map_digest)
    weighting.dump_weight_audit(out / "weights_audit.txt", bundle.split.train, inputs.per_map, inputs.penr_edge)
    header = model.read_checkpoint_header(checkpoint_path)  # validation pass
    if header["id_map_digest"] != bundle.id_map_digest:
        raise RuntimeError("checkpoint validation failed: digest mismatch")
    final = log[-1]["loss_per_pair"] if log else float("nan")
    print(
        f"trained {cfg.train.epochs} epochs (final loss/pair {final:.4f}); "
        f"preference edges +{inputs.per_map.n_positive}/-{inputs.per_map.n_negative}/0:{inputs.per_map.n_zero} "
        f"-> {checkpoint_path}"
    )
    return 0


def cmd_evaluate(cfg: RunConfig, checkpoint: Optional[str]) -> int:
    cfg.validate(need_data=False)
    out = Path(cfg.out_dir)
    checkpoint_path = Path(checkpoint) if checkpoint else out / "checkpoint.bin"
    if not checkpoint_path.exists():
        raise FileNotFoundError(f"checkpoint not found: {checkpoint_path}")
    # Model-structure settings must match the trained checkpoint, not
    # whatever the current flags/defaults happen to say.
    header = model.read_checkpoint_header(checkpoint_path)
    cfg.train = model.TrainConfig(**header["config"])
    cfg.per.alpha = cfg.train.alpha
    cfg.per.quantile_mode = cfg.train.quantile_mode
    bundle = load_bundle(out)
    inputs = prepare_pipeline(cfg, bundle)
    trained = model.load_checkpoint(
        checkpoint_path, inputs.graphs, inputs.weights, inputs.prg_outputs, expected_id_map_digest=bundle.id_map_digest
    )
    truth = metrics.truth_from_table(bundle.split.test)
    k_max = max(cfg.eval.k_values)
    lists = model.recommend_all(trained, k_max)
    reports = []
    for k in cfg.eval.k_values:
        recs = metrics.RecommendationSet(lists={u: lst[:k] for u, lst in lists.items()}, k=k)
        reports.append(metrics.full_report(recs, truth, inputs.catalog, bundle.partition))

    report_txt = out / "report.txt"
    with open(report_txt, "w", encoding="utf-8") as fh:
        for rep in reports:
            fh.write("\n".join(metrics.report_lines(rep)) + "\n")
    (out / "report.json").write_text(
        json.dumps([metrics.report_to_dict(r) for r in reports], sort_keys=True, indent=2), encoding="utf-8"
    )
    with open(out / "metrics.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        header = ["k", "ndcg", "recall", "hit", "precision", "conventional_coverage", "tail_coverage", "tail"]
        header += [f"coverage_{c}" for c in metrics.CATEGORIES + ("total",)]
        header += [f"entropy_{c}" for c in metrics.CATEGORIES]
        writer.writerow(header)
        for rep in reports:
            row = [rep.k, rep.ndcg, rep.recall, rep.hit, rep.precision, rep.conventional_coverage, rep.tail_coverage, rep.tail]
            row += [rep.coverage[c] for c in metrics.CATEGORIES + ("total",)]
            row += [rep.entropy[c] for c in metrics.CATEGORIES]
            writer.writerow(row)
    for rep in reports:
        print(f"K={rep.k}: recall {rep.recall:.4f}, ndcg {rep.ndcg:.4f}, cc {rep.conventional_coverage:.4f}, tail {rep.tail:.4f}")
    print(f"reports -> {report_txt}")
    return 0


# --------------------------------------------------------------------------- #
# analyze subcommands
# --------------------------------------------------------------------------- #
def _analyze_tr(cfg: RunConfig, out: Path) -> Path:
    table = dataset.load_interactions(cfg.data.interactions)
    path = out / "tr.csv"
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["p", "tr", "delta_tr"])
        for p, tr, delta in dataset.top_ratio_grid(table):
            writer.writerow([f"{p:.1f}", repr(tr), repr(delta)])
    return path


def _analyze_ks(cfg: RunConfig, out: Path, min_n: int) -> Path:
    table = dataset.load_interactions(cfg.data.interactions)
    catalog = dataset.load_catalog(cfg.data.catalog)
    report = analysis.ks_validation_report(table, catalog, min_n=min_n)
    path = out / "ks.csv"
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["name", "n", "ks_statistic", "p_value"])
        for row in report.game_rows:
            writer.writerow([row.name, row.n, repr(row.statistic), repr(row.p_value)])
        if report.rating_row is not None:
            r = report.rating_row
            writer.writerow([r.name, r.n, repr(r.statistic), repr(r.p_value)])
    if report.empty:
        print(f"warning: no game reached n >= {min_n} and no rating sample was usable", file=sys.stderr)
    return path


def _analyze_influence(out: Path, weights, convention: str) -> Path:
    e_h, n_h, n_l = weights
    res = analysis.influence_indices(e_h, n_h, n_l, convention)
    path = out / "influence.csv"
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["e_h", "n_h", "n_l", "degree_convention", "inf_i0", "inf_i1", "inf_u0", "inf_u1"])
        writer.writerow([e_h, n_h, n_l, convention, *(repr(v) for v in res.as_tuple())])
    print(
        f"influence ({convention}): i0={res.inf_i0:.4f} i1={res.inf_i1:.4f} "
        f"u0={res.inf_u0:.4f} u1={res.inf_u1:.4f} (sum {sum(res.as_tuple()):.6f})"
    )
    return path


def _analyze_spectrum(cfg: RunConfig, out: Path, max_nodes: int) -> Path:
    import torch

    table = dataset.load_interactions(cfg.data.interactions)
    bip = graphs.build_bipartite_graph(table)
    n_players = min(bip.n_players, max_nodes // 2)
    n_games = min(bip.n_games, max_nodes - n_players)
    keep = [(u, i) for u, i in bip.edges if u < n_players and i < n_games]
    n = n_players + n_games
    adj = np.zeros((n, n))
    edges = np.asarray([(u, n_players + i) for u, i in keep], dtype=np.int64).reshape(-1, 2)
    for u, v in edges:
        adj[u, v] = adj[v, u] = 1.0
    rng = np.random.default_rng(cfg.train.seed)
    signal = rng.standard_normal(n)
    before = analysis.laplacian_spectrum(adj, signal)
    step = model.unit_propagation_matrix(n, edges)
    smoothed = (step @ torch.from_numpy(signal)).numpy()
    after = analysis.laplacian_spectrum(adj, smoothed) if float(smoothed @ smoothed) > 0 else None
    path = out / "spectrum.csv"
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["lambda", "energy_input", "energy_after_step"])
        for k in range(n):
            row = [repr(float(before.eigenvalues[k])), repr(float(before.energies[k]))]
            row.append(repr(float(after.energies[k])) if after is not None else "")
            writer.writerow(row)
    return path


def _analyze_connections(cfg: RunConfig, out: Path, embeddings_path: Optional[str]) -> Path:
    catalog = dataset.load_catalog(cfg.data.catalog)
    if embeddings_path:
        emb = profiles.load_embeddings(embeddings_path)
    else:
        gen = profiles.StubGenerationClient()
        stub = profiles.StubEmbeddingClient(cfg.train.d_emb)
        cache = profiles.DescriptionCache(cfg.prg.cache or str(out / "prg_cache.jsonl"))
        mean_rating = catalog.mean_rating()
        texts = [profiles.generate_description(gen, profiles.build_game_prompt(m, mean_rating), cache) for m in catalog]
        emb = np.stack([profiles.embed_text(stub, t) for t in texts])
    rows = analysis.connection_similarity_report(catalog, emb)
    path = out / "connections.csv"
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["graph", "edge_count", "mean_euclidean", "mean_cosine"])
        for row in rows:
            writer.writerow([row.graph, row.edge_count, repr(row.mean_euclidean), repr(row.mean_cosine)])
    return path


def cmd_analyze(cfg: RunConfig, args) -> int:
    needs_catalog = args.subcommand in ("ks", "connections")
    needs_data = args.subcommand in ("ks", "spectrum", "tr")
    cfg.validate(need_data=needs_data, need_catalog=needs_catalog)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if args.subcommand == "tr":
        path = _analyze_tr(cfg, out)
    elif args.subcommand == "ks":
        path = _analyze_ks(cfg, out, args.min_n)
    elif args.subcommand == "influence":
        path = _analyze_influence(out, args.weights, args.degree_convention)
    elif args.subcommand == "spectrum":
        path = _analyze_spectrum(cfg, out, args.max_nodes)
    elif args.subcommand == "connections":
        path = _analyze_connections(cfg, out, args.embeddings)
    else:  # pragma: no cover - argparse restricts choices
        raise ValueError(args.subcommand)
    if not path.exists():
        raise RuntimeError(f"expected output missing: {path}")
    print(f"report -> {path}")
    return 0


# --------------------------------------------------------------------------- #
# argument parsing
# --------------------------------------------------------------------------- #
def _common_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", help="YAML run configuration")
    p.add_argument("--seed", type=int, help="override both split and train seeds")
    p.add_argument("--out", help="output directory")
    p.add_argument("--interactions", help="interaction file (csv/tsv/jsonl)")
    p.add_argument("--catalog", help="game catalog file (csv/jsonl)")
    return p


def _pipeline_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--per-alpha", type=float, dest="per_alpha", help="significance level; 0 disables preference weights")
    p.add_argument("--quantile-mode", choices=("algorithm", "exact"), dest="quantile_mode")
    p.add_argument("--per-normalization", choices=("per_game", "per_player"), dest="per_normalization")
    p.add_argument("--penr-edge-hot", type=float, dest="penr_edge_hot")
    p.add_argument("--penr-node-hot", type=float, dest="penr_node_hot")
    p.add_argument("--penr-node-cold", type=float, dest="penr_node_cold")
    p.add_argument("--prg", choices=("off", "stub", "live"), dest="prg_mode")
    p.add_argument("--prg-cache", dest="prg_cache")
    p.add_argument("--fusion-mode", choices=("mlp", "linear", "gated"), dest="fusion_mode")
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gamerec", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    common = _common_parser()
    pipeline = _pipeline_parser()

    p_ing = sub.add_parser("ingest", parents=[common], help="load, split, and persist the dataset bundle")
    p_ing.add_argument("--ratios", nargs=3, type=float, metavar=("TRAIN", "VALID", "TEST"))
    p_ing.add_argument("--hot-frac", type=float, dest="hot_frac")
    p_ing.add_argument("--cold-frac", type=float, dest="cold_frac")

    p_tr = sub.add_parser("train", parents=[common, pipeline], help="build graphs and weights, train, write a checkpoint")
    p_tr.add_argument("--epochs", type=int)
    p_tr.add_argument("--lr", type=float)
    p_tr.add_argument("--batch-size", type=int, dest="batch_size")
    p_tr.add_argument("--d-shared", type=int, dest="d_shared")
    p_tr.add_argument("--k-layers", type=int, dest="k_layers")
    p_tr.add_argument("--sgc-layers", type=int, dest="sgc_layers")
    p_tr.add_argument("--beta", type=float)
    p_tr.add_argument("--m-nsr", type=float, dest="m_nsr")
    p_tr.add_argument("--lambda-norm", type=float, dest="lambda_norm")
    p_tr.add_argument("--d-emb", type=int, dest="d_emb")
    p_tr.add_argument("--d-h", type=int, dest="d_h")

    p_ev = sub.add_parser("evaluate", parents=[common, pipeline], help="score a checkpoint against the test split")
    p_ev.add_argument("--checkpoint", help="checkpoint path (default <out>/checkpoint.bin)")
    p_ev.add_argument("--k-values", nargs="+", type=int, dest="k_values")

    p_an = sub.add_parser("analyze", parents=[common], help="statistical and graph diagnostics")
    p_an.add_argument("subcommand", choices=("ks", "spectrum", "influence", "connections", "tr"))
    p_an.add_argument("--weights", nargs=3, type=float, default=(5.0, 0.2, 6.0), metavar=("E_HOT", "N_HOT", "N_COLD"))
    p_an.add_argument("--degree-convention", choices=analysis.DEGREE_CONVENTIONS, default="plain", dest="degree_convention")
    p_an.add_argument("--min-n", type=int, default=30, dest="min_n")
    p_an.add_argument("--max-nodes", type=int, default=200, dest="max_nodes")
    p_an.add_argument("--embeddings", help="precomputed game embedding matrix (binary dump)")
    return parser


def _config_from_args(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    if getattr(args, "interactions", None):
        cfg.data.interactions = args.interactions
    if getattr(args, "catalog", None):
        cfg.data.catalog = args.catalog
    if getattr(args, "out", None):
        cfg.out_dir = args.out
    if getattr(args, "seed", None) is not None:
        cfg.split.seed = args.seed
        cfg.train.seed = args.seed
    if getattr(args, "ratios", None):
        cfg.split.ratios = tuple(args.ratios)
    for attr, target in (
        ("hot_frac", ("popularity", "hot_frac")),
        ("cold_frac", ("popularity", "cold_frac")),
        ("per_alpha", ("per", "alpha")),
        ("quantile_mode", ("per", "quantile_mode")),
        ("per_normalization", ("per", "normalization")),
        ("penr_edge_hot", ("penr", "edge_hot")),
        ("penr_node_hot", ("penr", "node_hot")),
        ("penr_node_cold", ("penr", "node_cold")),
        ("prg_mode", ("prg", "mode")),
        ("prg_cache", ("prg", "cache")),
        ("fusion_mode", ("train", "fusion_mode")),
        ("epochs", ("train", "epochs")),
        ("lr", ("train", "learning_rate")),
        ("batch_size", ("train", "batch_size")),
        ("d_shared", ("train", "d_shared")),
        ("k_layers", ("train", "k_layers")),
        ("sgc_layers", ("train", "sgc_layers")),
        ("beta", ("train", "beta")),
        ("m_nsr", ("train", "m_nsr")),
        ("lambda_norm", ("train", "lambda_norm")),
        ("d_emb", ("train", "d_emb")),
        ("d_h", ("train", "d_h")),
        ("k_values", ("eval", "k_values")),
    ):
        value = getattr(args, attr, None)
        if value is not None:
            section, name = target
            setattr(getattr(cfg, section), name, tuple(value) if name == "k_values" else value)
    # The quantile surrogate (1 - a)/a also ties training's stored alpha.
    cfg.train.alpha = cfg.per.alpha
    cfg.train.quantile_mode = cfg.per.quantile_mode
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _config_from_args(args)
        if args.command == "ingest":
            return cmd_ingest(cfg)
        if args.command == "train":
            return cmd_train(cfg)
        if args.command == "evaluate":
            return cmd_evaluate(cfg, args.checkpoint)
        if args.command == "analyze":
            return cmd_analyze(cfg, args)
        raise ValueError(f"unknown command {args.command!r}")
    except (ValueError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
