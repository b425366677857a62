import math

import numpy as np
import pytest

from gamerec import stats, weighting
from gamerec.dataset import GameCatalog, GameMeta, InteractionTable, popularity_partition
from gamerec.graphs import build_bipartite_graph

from conftest import random_catalog, random_interactions

LOG_2PI = math.log(2 * math.pi)

# Mapped (time, rating) values of the four-game case study; only the second
# interaction is significant at alpha = 0.05.
CASE_TIMES = [-0.8195, 3.7610, -0.4717, -0.3849]
CASE_RATINGS = [1.0232, 0.0102, -0.7678, -0.7678]


def case_study_bipartite():
    rows = [("u0", f"game{k}", 1.0) for k in range(4)]
    return build_bipartite_graph(InteractionTable.from_rows(rows))


def test_per_weights_case_study():
    b = case_study_bipartite()
    out = weighting.per_edge_weights(b, np.array(CASE_TIMES), np.array(CASE_RATINGS), alpha=0.05)
    assert out.weights[1] == pytest.approx(15.983, abs=1e-3)
    assert out.weights[0] == out.weights[2] == out.weights[3] == 0.0
    assert (out.n_positive, out.n_negative, out.n_zero) == (1, 0, 3)


def test_per_weights_negative_branch():
    b = case_study_bipartite()
    t = np.array([-2.0, 0.0, 0.0, 0.0])
    r = np.array([0.1, 1.0, 1.0, 1.0])
    out = weighting.per_edge_weights(b, t, r, alpha=0.05)
    assert out.weights[0] == pytest.approx(-(LOG_2PI + 4.0 + 0.01), abs=1e-12)
    assert out.n_negative == 1


def test_per_weights_rejects_bad_alpha():
    b = case_study_bipartite()
    for alpha in (0.0, 0.5, -0.1, 0.7):
        with pytest.raises(ValueError):
            weighting.per_edge_weights(b, np.zeros(4), np.zeros(4), alpha=alpha)


def test_per_weights_alignment_checks():
    b = case_study_bipartite()
    with pytest.raises(ValueError):
        weighting.per_edge_weights(b, np.zeros(3), np.zeros(4), alpha=0.05)
    with pytest.raises(ValueError):
        weighting.per_edge_weights(b, np.zeros(4), np.zeros(5), alpha=0.05)


def test_per_nonzero_weights_bounded_below(rng):
    table = random_interactions(rng, 30, 12)
    b = build_bipartite_graph(table)
    t = rng.standard_normal(len(b)) * 2
    r = rng.standard_normal(12)
    out = weighting.per_edge_weights(b, t, r, alpha=0.2)
    nz = out.weights[out.weights != 0.0]
    assert np.all(np.abs(nz) >= LOG_2PI)


def test_per_active_fraction_nondecreasing_in_alpha(rng):
    table = random_interactions(rng, 40, 15)
    b = build_bipartite_graph(table)
    t = rng.standard_normal(len(b)) * 2
    r = rng.standard_normal(15)
    fractions = []
    for alpha in (0.01, 0.05, 0.1, 0.2, 0.3, 0.4, 0.49):
        out = weighting.per_edge_weights(b, t, r, alpha=alpha)
        fractions.append((out.n_positive + out.n_negative) / len(b))
    assert all(a <= b_ + 1e-12 for a, b_ in zip(fractions, fractions[1:]))


def test_per_tiny_alpha_degenerates_to_inert(rng):
    # alpha -> 0+ sends the threshold to infinity: no edge stays significant
    table = random_interactions(rng, 30, 12)
    b = build_bipartite_graph(table)
    t = rng.standard_normal(len(b)) * 3
    r = rng.standard_normal(12)
    out = weighting.per_edge_weights(b, t, r, alpha=1e-9)
    assert np.all(out.weights == 0.0)
    assert out.n_zero == len(b)


def test_per_half_exponent_variant():
    b = case_study_bipartite()
    t = np.array([3.0, 0.0, 0.0, 0.0])
    r = np.array([0.1, 1.0, 1.0, 1.0])
    full = weighting.per_edge_weights(b, t, r, alpha=0.05)
    half = weighting.per_edge_weights(b, t, r, alpha=0.05, half_exponent=True)
    assert half.weights[0] == pytest.approx(LOG_2PI + (9.0 + 0.01) / 2, abs=1e-12)
    assert full.weights[0] > half.weights[0]


def test_per_sign_agreement_with_scalar_rule(rng):
    table = random_interactions(rng, 25, 10)
    b = build_bipartite_graph(table)
    t = rng.standard_normal(len(b)) * 1.5
    r = rng.standard_normal(10)
    out = weighting.per_edge_weights(b, t, r, alpha=0.1)
    q = stats.fisher_upper_quantile(0.1)
    for e in range(len(b)):
        expected = stats.per_sign(t[e], r[b.edges[e, 1]], q)
        assert np.sign(out.weights[e]) == expected


# --------------------------------------------------------------------- penr
def make_partition(n=10, hot=(0, 1), cold=(8, 9)):
    counts = np.arange(n, 0, -1)
    return popularity_partition_like(n, hot, cold, counts)


def popularity_partition_like(n, hot, cold, counts):
    from gamerec.dataset import PopularityPartition

    return PopularityPartition(hot=frozenset(hot), cold=frozenset(cold), player_count=np.asarray(counts))


def test_penr_default_weights():
    pw = weighting.penr_weights(make_partition())
    assert pw.edge_weight_by_game[0] == 5.0 and pw.node_weight_by_game[0] == 0.2
    assert pw.edge_weight_by_game[5] == 1.0 and pw.node_weight_by_game[5] == 1.0
    assert pw.edge_weight_by_game[9] == 1.0 and pw.node_weight_by_game[9] == 6.0


def test_penr_rejects_nonpositive():
    with pytest.raises(ValueError):
        weighting.penr_weights(make_partition(), theta_e_hot=0.0)


def test_penr_edge_weights_for_bipartite():
    rows = [("u0", "game0", 1.0), ("u0", "game5", 1.0), ("u1", "game9", 1.0)]
    table = InteractionTable.from_rows(rows)
    # game indices follow first-seen: game0 -> 0, game5 -> 1, game9 -> 2
    part = popularity_partition_like(3, hot=(0,), cold=(2,), counts=[5, 3, 1])
    pw = weighting.penr_weights(part)
    b = build_bipartite_graph(table)
    assert pw.edge_weights_for(b).tolist() == [5.0, 1.0, 1.0]


# ------------------------------------------------------------------ combine
def test_combine_elementwise_sum():
    b = case_study_bipartite()
    per = weighting.per_edge_weights(b, np.array(CASE_TIMES), np.array(CASE_RATINGS), alpha=0.05)
    combined = weighting.combine_weights(per, np.array([5.0, 5.0, 1.0, 1.0]))
    assert combined.weights[1] == pytest.approx(per.weights[1] + 5.0)
    assert combined.weights[0] == 5.0
    assert combined.weights[2] == 1.0


def test_combine_keeps_negative_sums():
    per = weighting.EdgeWeightMap(np.array([-3.0]), alpha=0.05, mode="algorithm", n_positive=0, n_negative=1, n_zero=0)
    combined = weighting.combine_weights(per, np.array([1.0]))
    assert combined.weights[0] == -2.0


def test_combine_is_linear(rng):
    n = 50
    a = rng.standard_normal(n)
    b = rng.standard_normal(n)
    base = weighting.EdgeWeightMap(a, 0.05, "algorithm", 0, 0, n)
    shifted = weighting.EdgeWeightMap(a + b, 0.05, "algorithm", 0, 0, n)
    c = rng.standard_normal(n)
    assert np.allclose(weighting.combine_weights(shifted, c).weights, weighting.combine_weights(base, c).weights + b)


def test_combine_length_mismatch():
    per = weighting.EdgeWeightMap(np.zeros(3), 0.05, "algorithm", 0, 0, 3)
    with pytest.raises(ValueError):
        weighting.combine_weights(per, np.zeros(4))


# -------------------------------------------------------- preference inputs
def aligned_catalog(table, rng):
    return random_catalog(rng, table.n_games)


def test_preference_inputs_per_game_normalization(rng):
    table = random_interactions(rng, 40, 8, per_player=(4, 8))
    catalog = aligned_catalog(table, rng)
    mapped_time, mapped_rating = weighting.preference_inputs(table, catalog)
    for g, rows in enumerate(table.rows_by_game()):
        sample = table.times[rows] + 1.0
        if len(rows) < 3 or np.ptp(sample) == 0:
            assert np.all(mapped_time[rows] == 0.0)
        else:
            expected = stats.to_standard_normal(sample).values
            assert np.allclose(mapped_time[rows], expected, atol=1e-9)
    ratings = np.array([m.avg_rating for m in catalog])
    assert np.allclose(mapped_rating, stats.to_standard_normal(ratings + 1.0).values, atol=1e-9)


def test_preference_inputs_small_groups_inert():
    rows = [("u0", "game0", 3.0), ("u1", "game0", 5.0), ("u0", "game1", 2.0)]
    table = InteractionTable.from_rows(rows)
    catalog = GameCatalog(
        [
            GameMeta(game_id="game0", title="A", avg_rating=50.0),
            GameMeta(game_id="game1", title="B", avg_rating=70.0),
        ]
    )
    mapped_time, mapped_rating = weighting.preference_inputs(table, catalog)
    assert np.all(mapped_time == 0.0)  # both games have < 3 observations
    assert np.all(mapped_rating == 0.0)  # rating sample too small to map


def test_preference_inputs_per_player_mode(rng):
    table = random_interactions(rng, 10, 20, per_player=(5, 9))
    catalog = aligned_catalog(table, rng)
    mapped_time, _ = weighting.preference_inputs(table, catalog, normalization="per_player")
    for rows in table.rows_by_player():
        sample = table.times[rows] + 1.0
        if len(rows) >= 3 and np.ptp(sample) > 0:
            assert np.allclose(mapped_time[rows], stats.to_standard_normal(sample).values, atol=1e-9)


def test_preference_inputs_missing_ratings_use_mean(rng):
    table = random_interactions(rng, 20, 4, per_player=(2, 4))
    entries = [
        GameMeta(game_id="game0", title="A", avg_rating=80.0),
        GameMeta(game_id="game1", title="B", avg_rating=None),
        GameMeta(game_id="game2", title="C", avg_rating=60.0),
        GameMeta(game_id="game3", title="D", avg_rating=40.0),
    ]
    _, mapped_rating = weighting.preference_inputs(table, GameCatalog(entries))
    filled = np.array([80.0, 60.0, 60.0, 40.0])
    assert np.allclose(mapped_rating, stats.to_standard_normal(filled + 1.0).values, atol=1e-9)


def test_dump_weight_audit(tmp_path, rng):
    table = random_interactions(rng, 10, 5)
    b = build_bipartite_graph(table)
    per = weighting.per_edge_weights(b, rng.standard_normal(len(b)), rng.standard_normal(5), alpha=0.1)
    penr_edge = np.ones(len(b))
    out = tmp_path / "audit.txt"
    weighting.dump_weight_audit(out, table, per, penr_edge)
    lines = out.read_text().strip().splitlines()
    assert len(lines) == len(b)
    parts = lines[0].split()
    assert len(parts) == 5
    assert float(parts[4]) == pytest.approx(float(parts[2]) + float(parts[3]))
