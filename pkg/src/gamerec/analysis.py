"""Diagnostics: influence-index case study, Laplacian spectral energy,
per-game normality validation, and raw-vs-strict connection similarity.

The influence case study works on the fixed 2-player/2-game topology with
interactions (u0,i0), (u0,i1), (u1,i1), where i1 is popular and i0 is
long-tail: after three reweighted layers the representation of u1 is
A*e_i0 + B*e_i1 + C*e_u0 + D*e_u1, and the influence indices normalize
(A, B, C, D) to sum to 1. Two degree conventions are offered because the
normalization behind neighbor counts is a modeling choice; the directional
behavior of the indices under weight changes is the contract.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import stats
from .dataset import GameCatalog, InteractionTable
from .graphs import CategoryGraph, build_raw_category_graph, build_strict_graph

DEGREE_CONVENTIONS = ("plain", "self_inclusive")


@dataclass(frozen=True)
class InfluenceResult:
    inf_i0: float
    inf_i1: float
    inf_u0: float
    inf_u1: float
    e_h: float
    n_h: float
    n_l: float
    degree_convention: str

    def as_tuple(self):
        return (self.inf_i0, self.inf_i1, self.inf_u0, self.inf_u1)


def influence_components(e_h: float, n_h: float, n_l: float, degree_convention: str = "plain"):
    """Unnormalized (A, B, C, D) influence polynomials of the case study."""
    if degree_convention not in DEGREE_CONVENTIONS:
        raise ValueError(f"unknown degree convention {degree_convention!r}")
    if e_h <= 0 or n_h <= 0 or n_l <= 0:
        raise ValueError("influence weights must be positive")
    add = 1.0 if degree_convention == "self_inclusive" else 0.0
    deg = {"u0": 2.0 + add, "u1": 1.0 + add, "i0": 1.0 + add, "i1": 2.0 + add}

    def c(a, b):
        return 1.0 / (math.sqrt(deg[a]) * math.sqrt(deg[b]))

    a = e_h * n_h * n_l * c("u1", "i1") * c("u0", "i1") * c("u0", "i0")
    b = (
        e_h * n_h * c("u1", "u1") ** 2 * c("u1", "i1")
        + e_h * n_h**2 * c("u1", "i1") * c("i1", "i1") * c("u1", "u1")
        + e_h * n_h**3 * c("u1", "i1") * c("i1", "i1") ** 2
        + e_h**2 * n_h**2 * c("u1", "i1") ** 3
        + e_h**2 * n_h**2 * c("u0", "i1") ** 2 * c("u1", "i1")
    )
    cc = (
        e_h * n_h * c("u1", "i1") * c("u0", "i1") * c("u1", "u1")
        + e_h * n_h**2 * c("u1", "i1") * c("i1", "i1") * c("u0", "i1")
        + e_h * n_h * c("u1", "i1") * c("u0", "i1") * c("u0", "u0")
    )
    d = (
        c("u1", "u1") ** 3
        + e_h * n_h * c("u1", "u1") * c("u1", "i1") ** 2
        + e_h * n_h**2 * c("u1", "i1") ** 2 * c("i1", "i1")
        + e_h * n_h * c("u1", "i1") ** 2 * c("u1", "u1")
    )
    return a, b, cc, d


def influence_indices(e_h: float, n_h: float, n_l: float, degree_convention: str = "plain") -> InfluenceResult:
    """Normalized influence of (i0, i1, u0, u1) on u1 after three layers."""
    a, b, c, d = influence_components(e_h, n_h, n_l, degree_convention)
    total = a + b + c + d
    if total <= 0:
        raise ValueError("degenerate influence normalization")
    return InfluenceResult(
        inf_i0=a / total,
        inf_i1=b / total,
        inf_u0=c / total,
        inf_u1=d / total,
        e_h=e_h,
        n_h=n_h,
        n_l=n_l,
        degree_convention=degree_convention,
    )


def jacobi_eigh(matrix: np.ndarray, tol: float = 1e-10, max_sweeps: int = 100):
    """Cyclic Jacobi eigendecomposition of a symmetric matrix.

    Sweeps rotate every off-diagonal pair until the off-diagonal Frobenius
    norm drops below tol. Returns (eigenvalues ascending, eigenvectors as
    columns in the matching order).
    """
    a = np.array(matrix, dtype=float)
    n = a.shape[0]
    if a.shape != (n, n):
        raise ValueError("matrix must be square")
    if not np.allclose(a, a.T, atol=1e-12):
        raise ValueError("matrix must be symmetric")
    v = np.eye(n)

    def offdiag(m):
        # direct off-diagonal norm; the sum-minus-diagonal form cancels badly
        off = m - np.diag(np.diag(m))
        return math.sqrt(np.sum(np.square(off)))

    for _ in range(max_sweeps):
        if offdiag(a) < tol:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) < tol / max(1, n * n):
                    continue
                # Classic stable rotation angle
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                cos = 1.0 / math.sqrt(t * t + 1.0)
                sin = t * cos
                rot_p = cos * a[:, p] - sin * a[:, q]
                rot_q = sin * a[:, p] + cos * a[:, q]
                a[:, p], a[:, q] = rot_p, rot_q
                rot_p = cos * a[p, :] - sin * a[q, :]
                rot_q = sin * a[p, :] + cos * a[q, :]
                a[p, :], a[q, :] = rot_p, rot_q
                rot_p = cos * v[:, p] - sin * v[:, q]
                rot_q = sin * v[:, p] + cos * v[:, q]
                v[:, p], v[:, q] = rot_p, rot_q
    else:
        raise RuntimeError("Jacobi sweeps did not converge")
    eigenvalues = np.diag(a).copy()
    order = np.argsort(eigenvalues, kind="stable")
    return eigenvalues[order], v[:, order]


@dataclass(frozen=True)
class SpectrumResult:
    eigenvalues: np.ndarray
    energies: np.ndarray
    eigenvectors: np.ndarray


def adjacency_matrix(graph) -> np.ndarray:
    """Dense adjacency from a CategoryGraph or an already-dense array."""
    if isinstance(graph, CategoryGraph):
        a = np.zeros((graph.n_games, graph.n_games))
        for i, j in graph.edges:
            a[i, j] = a[j, i] = 1.0
        return a
    a = np.asarray(graph, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("adjacency must be square")
    if not np.allclose(a, a.T, atol=1e-12):
        raise ValueError("adjacency must be symmetric")
    return a


def laplacian_spectrum(graph, signal: np.ndarray) -> SpectrumResult:
    """Energy of a node signal in the eigenbasis of L = D - A.

    Energies are (u_i . X)^2 normalized to sum to 1; invariant under
    rescaling of the signal.
    """
    a = adjacency_matrix(graph)
    x = np.asarray(signal, dtype=float)
    if x.shape != (a.shape[0],):
        raise ValueError(f"signal has shape {x.shape}, expected ({a.shape[0]},)")
    total = float(x @ x)
    if total <= 0.0:
        raise ValueError("the energy distribution of a zero signal is undefined")
    lap = np.diag(a.sum(axis=1)) - a
    eigenvalues, vectors = jacobi_eigh(lap)
    coeffs = vectors.T @ x
    energies = np.square(coeffs)
    energies = energies / energies.sum()
    return SpectrumResult(eigenvalues=eigenvalues, energies=energies, eigenvectors=vectors)


def rayleigh_quotient(adjacency: np.ndarray, x: np.ndarray) -> float:
    """x^T L x / x^T x with L = D - A."""
    a = np.asarray(adjacency, dtype=float)
    x = np.asarray(x, dtype=float)
    lap = np.diag(a.sum(axis=1)) - a
    denom = float(x @ x)
    if denom <= 0:
        raise ValueError("zero signal")
    return float(x @ lap @ x) / denom


@dataclass(frozen=True)
class KsValidationRow:
    name: str
    n: int
    statistic: float
    p_value: float


@dataclass(frozen=True)
class KsValidationReport:
    game_rows: tuple
    rating_row: Optional[KsValidationRow]
    empty: bool


def ks_validation_report(table: InteractionTable, catalog: GameCatalog, min_n: int = 30) -> KsValidationReport:
    """Per-game KS results for mapped dwelling times (games with at least
    min_n observations) plus one global row for mapped average ratings."""
    rows = []
    for g, game_rows in enumerate(table.rows_by_game()):
        if len(game_rows) < min_n:
            continue
        sample = table.times[game_rows] + 1.0
        if np.ptp(sample) == 0.0:
            continue
        mapped = stats.to_standard_normal(sample).values
        res = stats.ks_test_standard_normal(mapped)
        rows.append(KsValidationRow(name=table.game_ids[g], n=res.n, statistic=res.statistic, p_value=res.p_value))

    rating_row = None
    ratings = np.asarray([m.avg_rating for m in catalog if m.avg_rating is not None], dtype=float)
    if len(ratings) >= 3 and np.ptp(ratings) > 0.0:
        mapped = stats.to_standard_normal(ratings + 1.0).values
        res = stats.ks_test_standard_normal(mapped)
        rating_row = KsValidationRow(name="average_rating", n=res.n, statistic=res.statistic, p_value=res.p_value)
    return KsValidationReport(game_rows=tuple(rows), rating_row=rating_row, empty=not rows and rating_row is None)


@dataclass(frozen=True)
class ConnectionSimilarityRow:
    graph: str
    edge_count: int
    mean_euclidean: float
    mean_cosine: float


def connection_similarity_report(catalog: GameCatalog, game_embeddings: np.ndarray) -> list:
    """Edge counts and mean embedding similarity over the three raw and
    three strict game graphs."""
    emb = np.asarray(game_embeddings, dtype=float)
    if emb.shape[0] != len(catalog):
        raise ValueError(f"need one embedding per game: {emb.shape[0]} != {len(catalog)}")
    graphs = [
        build_raw_category_graph(catalog, "genre"),
        build_raw_category_graph(catalog, "developer"),
        build_raw_category_graph(catalog, "publisher"),
        build_strict_graph(catalog, "genre", "developer"),
        build_strict_graph(catalog, "genre", "publisher"),
        build_strict_graph(catalog, "developer", "publisher"),
    ]
    norms = np.linalg.norm(emb, axis=1)
    rows = []
    for g in graphs:
        if len(g.edges):
            a, b = g.edges[:, 0], g.edges[:, 1]
            dist = np.linalg.norm(emb[a] - emb[b], axis=1)
            denom = np.maximum(norms[a] * norms[b], 1e-300)
            cos = np.sum(emb[a] * emb[b], axis=1) / denom
            rows.append(
                ConnectionSimilarityRow(
                    graph=g.kind,
                    edge_count=len(g.edges),
                    mean_euclidean=float(dist.mean()),
                    mean_cosine=float(cos.mean()),
                )
            )
        else:
            rows.append(ConnectionSimilarityRow(graph=g.kind, edge_count=0, mean_euclidean=float("nan"), mean_cosine=float("nan")))
    return rows
