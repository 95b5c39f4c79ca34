"""Subgraph-count functions on the edge cube and the ERGM decomposition.

A simple graph on N labeled vertices is a point of {-1,1}^n, n = N(N-1)/2,
through the fixed upper-triangle order (i < j, lexicographic): coordinate +1
means the edge is present.  The 0/1 adjacency entries relate to cube
coordinates by A = (1 + y)/2, so a derivative in A converts to a discrete
cube gradient through the factor 1/2 (pinned by the normalization audit
test, together with the N^2 t(H, .) vs T/N scale conventions).

Homomorphism counts are exhaustive enumerations over vertex maps; the only
shortcut is the trace formula for triangles, which is cross-checked against
the enumerator.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .bits import sign_matrix, vertex_to_signs
from .cube import CubeFunction

# d(adjacency)/d(cube coordinate): A = (1 + y)/2.
A_DERIV_TO_CUBE = 0.5

# enumeration cap on N^m map tuples
_HOM_CAP = 10 ** 8
_CHUNK = 1 << 18


def pair_count(num_vertices: int) -> int:
    return num_vertices * (num_vertices - 1) // 2


def edge_pairs(num_vertices: int) -> np.ndarray:
    """(n, 2) array of 0-based vertex pairs in the fixed i < j order."""
    return np.array([(i, j) for i in range(num_vertices)
                     for j in range(i + 1, num_vertices)], dtype=np.int64)


def pair_index_matrix(num_vertices: int) -> np.ndarray:
    """(N, N) lookup: unordered pair -> cube coordinate; -1 on the diagonal."""
    idx = np.full((num_vertices, num_vertices), -1, dtype=np.int64)
    for c, (i, j) in enumerate(edge_pairs(num_vertices)):
        idx[i, j] = idx[j, i] = c
    return idx


def adjacency_from_vertex(y: int, num_vertices: int) -> np.ndarray:
    """0/1 adjacency matrix of the graph encoded by vertex index y."""
    bits = (vertex_to_signs(y, pair_count(num_vertices)) > 0).astype(np.int64)
    a = np.zeros((num_vertices, num_vertices), dtype=np.int64)
    pairs = edge_pairs(num_vertices)
    a[pairs[:, 0], pairs[:, 1]] = bits
    a[pairs[:, 1], pairs[:, 0]] = bits
    return a


def _normalize_edges(edges) -> tuple[tuple[int, int], ...]:
    out = []
    seen = set()
    for u, v in edges:
        u, v = int(u), int(v)
        if u == v:
            raise ValueError("subgraph terms must be simple (no loops)")
        key = (min(u, v), max(u, v))
        if key in seen:
            raise ValueError("subgraph terms must be simple (no multi-edges)")
        seen.add(key)
        out.append(key)
    if not out:
        raise ValueError("subgraph terms need at least one edge")
    return tuple(out)


@dataclass(frozen=True)
class SubgraphModel:
    """f(y) = N^2 sum_i beta_i t(H_i, G_y) on the edge cube of K_N.

    Each term is (edges, beta) with 0-based vertex labels inside H_i.
    """

    num_vertices: int
    terms: tuple

    def __post_init__(self):
        if self.num_vertices < 2:
            raise ValueError("need at least two graph vertices")
        norm = []
        for edges, beta in self.terms:
            edges = _normalize_edges(edges)
            k = max(max(e) for e in edges) + 1
            if float(self.num_vertices) ** k > _HOM_CAP:
                raise ValueError(
                    f"enumeration cap exceeded: N^{k} > {_HOM_CAP}; use a smaller N"
                )
            norm.append((edges, float(beta)))
        object.__setattr__(self, "terms", tuple(norm))

    @property
    def n(self) -> int:
        return pair_count(self.num_vertices)


def triangle_model(num_vertices: int, beta: float = 1.0) -> SubgraphModel:
    return SubgraphModel(num_vertices, (( ((0, 1), (0, 2), (1, 2)), beta),))


def _map_chunks(num_vertices: int, k: int):
    total = num_vertices ** k
    if total > _HOM_CAP:
        raise ValueError(
            f"enumeration cap exceeded: N^{k} = {total} > {_HOM_CAP}; use a smaller N"
        )
    for lo in range(0, total, _CHUNK):
        idx = np.arange(lo, min(lo + _CHUNK, total), dtype=np.int64)
        q = np.empty((idx.size, k), dtype=np.int64)
        rem = idx
        for c in range(k):
            q[:, c] = rem % num_vertices
            rem = rem // num_vertices
        yield q


def hom_count(edges, adjacency: np.ndarray) -> int:
    """Number of maps [k] -> [N] sending every edge of H to an edge of G."""
    edges = _normalize_edges(edges)
    k = max(max(e) for e in edges) + 1
    a = np.asarray(adjacency)
    num = a.shape[0]
    total = 0
    for q in _map_chunks(num, k):
        prod = np.ones(q.shape[0], dtype=np.int64)
        for u, v in edges:
            prod *= a[q[:, u], q[:, v]]
        total += int(prod.sum())
    return total


def hom_density(edges, adjacency: np.ndarray) -> float:
    """t(H, G) = Hom(H, G) / N^k."""
    edges = _normalize_edges(edges)
    k = max(max(e) for e in edges) + 1
    num = np.asarray(adjacency).shape[0]
    return hom_count(edges, adjacency) / float(num) ** k


# ---------------------------------------------------------------------------
# Triangle specials (trace shortcut, cross-checked against the enumerator)
# ---------------------------------------------------------------------------

def triangle_count(adjacency: np.ndarray) -> int:
    a = np.asarray(adjacency, dtype=np.int64)
    return int(np.trace(a @ a @ a)) // 6


def triangle_f(y: int, num_vertices: int) -> float:
    """f(y) = T(G_y) / N = Tr(A^3) / (6N)."""
    return triangle_count(adjacency_from_vertex(y, num_vertices)) / num_vertices


def triangle_grad(y: int, num_vertices: int) -> np.ndarray:
    """Above-diagonal part of A^2 / N (the derivative in adjacency entries;
    multiply by A_DERIV_TO_CUBE for the discrete cube gradient)."""
    a = adjacency_from_vertex(y, num_vertices)
    a2 = a @ a
    pairs = edge_pairs(num_vertices)
    return a2[pairs[:, 0], pairs[:, 1]].astype(float) / num_vertices


# ---------------------------------------------------------------------------
# Dense tables and the general gradient
# ---------------------------------------------------------------------------

def model_table(model: SubgraphModel) -> CubeFunction:
    """Dense table of f(y) = N^2 sum_i beta_i t(H_i, G_y) over all graphs."""
    num = model.num_vertices
    n = model.n
    bits = (sign_matrix(n) > 0).astype(np.float64)  # (2^n, n) edge indicators
    pair_idx = pair_index_matrix(num)
    vals = np.zeros(1 << n)
    for edges, beta in model.terms:
        k = max(max(e) for e in edges) + 1
        scale = beta / float(num) ** (k - 2)
        acc = np.zeros(1 << n)
        for q in _map_chunks(num, k):
            ids = np.stack([pair_idx[q[:, u], q[:, v]] for u, v in edges], axis=1)
            ok = np.all(ids >= 0, axis=1)
            ids = ids[ok]
            for row in ids:
                prod = bits[:, row[0]].copy()
                for c in row[1:]:
                    prod *= bits[:, c]
                acc += prod
        vals += scale * acc
    return CubeFunction(n, vals)


def subgraph_grad(model: SubgraphModel, y: int) -> np.ndarray:
    """Derivative of f in the adjacency entries, by edge-placement sums.

    For each term and each edge slot (a, b) of H, maps q with {q_a, q_b} off
    the diagonal contribute the product of the remaining edge indicators to
    coordinate {q_a, q_b}.  Multiply by A_DERIV_TO_CUBE for the discrete cube
    gradient (valid whenever no two H-edges can land on one graph edge
    without creating a loop, which covers single edges and cliques).
    """
    num = model.num_vertices
    a = adjacency_from_vertex(y, num).astype(float)
    pair_idx = pair_index_matrix(num)
    grad = np.zeros(model.n)
    for edges, beta in model.terms:
        k = max(max(e) for e in edges) + 1
        scale = beta / float(num) ** (k - 2)
        ecount = len(edges)
        for q in _map_chunks(num, k):
            vals = np.stack([a[q[:, u], q[:, v]] for u, v in edges], axis=1)
            pre = np.ones((q.shape[0], ecount))
            for c in range(1, ecount):
                pre[:, c] = pre[:, c - 1] * vals[:, c - 1]
            suf = np.ones((q.shape[0], ecount))
            for c in range(ecount - 2, -1, -1):
                suf[:, c] = suf[:, c + 1] * vals[:, c + 1]
            loo = pre * suf
            for e, (u, v) in enumerate(edges):
                ids = pair_idx[q[:, u], q[:, v]]
                ok = ids >= 0
                np.add.at(grad, ids[ok], scale * loo[ok, e])
    return grad


# ---------------------------------------------------------------------------
# Expectations under independent-edge (product) measures
# ---------------------------------------------------------------------------

def _dedup_products(p: np.ndarray, ids: np.ndarray):
    """Row products of p[ids] with repeated ids counted once; loops (-1) zero
    the row.  Returns (sorted ids, first-occurrence mask, factors, products)."""
    order = np.argsort(ids, axis=1)
    ids_s = np.take_along_axis(ids, order, axis=1)
    first = np.ones_like(ids_s, dtype=bool)
    first[:, 1:] = ids_s[:, 1:] != ids_s[:, :-1]
    factors = np.where(first, p[np.clip(ids_s, 0, None)], 1.0)
    factors[ids_s < 0] = 0.0
    return ids_s, first, factors, factors.prod(axis=1)


def expected_value(model: SubgraphModel, mean: np.ndarray) -> float:
    """E f(Y) for Y with independent coordinates of the given mean vector.

    Exact product-moment formula: each map contributes the product of edge
    probabilities over the distinct graph edges it uses (indicators are
    idempotent), and maps that hit the diagonal contribute nothing.
    """
    mean = np.asarray(mean, dtype=float).reshape(-1)
    if mean.size != model.n:
        raise ValueError("mean vector has the wrong length")
    p = (1.0 + mean) / 2.0
    num = model.num_vertices
    pair_idx = pair_index_matrix(num)
    total = 0.0
    for edges, beta in model.terms:
        k = max(max(e) for e in edges) + 1
        scale = beta / float(num) ** (k - 2)
        for q in _map_chunks(num, k):
            ids = np.stack([pair_idx[q[:, u], q[:, v]] for u, v in edges], axis=1)
            total += scale * float(_dedup_products(p, ids)[3].sum())
    return total


def expected_grad(model: SubgraphModel, mean: np.ndarray) -> np.ndarray:
    """Gradient of :func:`expected_value` in the mean vector."""
    mean = np.asarray(mean, dtype=float).reshape(-1)
    p = (1.0 + mean) / 2.0
    num = model.num_vertices
    pair_idx = pair_index_matrix(num)
    grad_p = np.zeros(model.n)
    for edges, beta in model.terms:
        k = max(max(e) for e in edges) + 1
        scale = beta / float(num) ** (k - 2)
        ecount = len(edges)
        for q in _map_chunks(num, k):
            ids = np.stack([pair_idx[q[:, u], q[:, v]] for u, v in edges], axis=1)
            ids_s, first, factors, _ = _dedup_products(p, ids)
            pre = np.ones((q.shape[0], ecount))
            for c in range(1, ecount):
                pre[:, c] = pre[:, c - 1] * factors[:, c - 1]
            suf = np.ones((q.shape[0], ecount))
            for c in range(ecount - 2, -1, -1):
                suf[:, c] = suf[:, c + 1] * factors[:, c + 1]
            loo = pre * suf
            take = first & (ids_s >= 0)
            np.add.at(grad_p, ids_s[take], scale * loo[take])
    return grad_p * 0.5  # dp/dmean


# ---------------------------------------------------------------------------
# Exponential-random-graph decomposition
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HammingReport:
    """Coupling distance and entropy budget of an ERGM decomposition."""

    mean_hamming: float
    std_error: float
    theorem_bound: float
    entropy_graph: float          # Ent(G) for the exponential graph
    mixture_edge_entropy: float   # sum_atoms weight * I(p(theta))
    entropy_slack_allowed: float  # eps * C(N,2)

    @property
    def entropy_ok(self) -> bool:
        return (self.entropy_graph - self.mixture_edge_entropy
                <= self.entropy_slack_allowed + 1e-9)


def edge_probability_vector(mean: np.ndarray) -> np.ndarray:
    return (1.0 + np.asarray(mean, dtype=float)) / 2.0


def edge_entropy(p: np.ndarray) -> float:
    """I(p) = -sum p log p + (1-p) log (1-p), with 0 log 0 = 0."""
    p = np.asarray(p, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = p * np.log(p) + (1.0 - p) * np.log(1.0 - p)
    return float(-np.nan_to_num(terms, nan=0.0, posinf=0.0, neginf=0.0).sum())


def exponential_bound(num_vertices: int, eps: float, beta_edge_sum: float) -> float:
    """20 C(N,2)^(11/12) eps^(-1/3) (sum |beta_i| |E(H_i)|)^(1/3).

    Stated with equality in the source theorem; the context makes it an
    upper bound, which is what the pipeline tests.
    """
    n = pair_count(num_vertices)
    return 20.0 * n ** (11.0 / 12.0) * eps ** (-1.0 / 3.0) * beta_edge_sum ** (1.0 / 3.0)


def ergm_decompose(model: SubgraphModel, eps: float, num_atoms: int, seed: int,
                   alpha: float = 2.0, gw_samples: int = 4000,
                   coupling_samples: int = 20000):
    """Decompose the ERGM law into near-product tilts and report the coupling.

    Returns (mixture, report).  The graph law is the dense cube measure with
    log-density f(y) = N^2 sum beta_i t(H_i, G_y); the mixture comes from the
    stopped localization dynamics, each atom mapped to its product-fit edge
    probability vector.  The Hamming coupling reuses the shared-uniform
    sampler coupling per atom.
    """
    from . import localization
    from .complexity import gw_monte_carlo
    from .cube import CubeMeasure, center_of_mass, coupled_sample_many, g_table, kl, tilt, uniform_measure
    from .bits import hamming

    if model.num_vertices > 6:
        raise ValueError("ERGM decomposition is capped at N <= 6")
    if not 0.0 < eps < 1.0 / 16.0:
        raise ValueError("eps must lie in (0, 1/16)")
    table = model_table(model)
    nu = CubeMeasure(table)
    n = nu.n

    gw_est = gw_monte_carlo(g_table(nu), gw_samples, seed)
    cfg = localization.SdeConfig(nu=nu, eps=eps, alpha=alpha, seed=seed)
    mixture = localization.decompose(cfg, num_atoms,
                                     gw_value=gw_est.upper_confidence())

    # entropy budget and per-atom couplings
    rng = np.random.Generator(np.random.Philox(key=[seed & 0xFFFFFFFF, 7]))
    mu = uniform_measure(n)
    ent_graph = n * np.log(2.0) - kl(nu, mu)
    edge_ent = 0.0
    dists = []
    per_atom = max(1, coupling_samples // max(1, len(mixture.atoms)))
    for theta, weight in mixture.atoms:
        tilted = tilt(nu, theta)
        pvec = edge_probability_vector(center_of_mass(tilted))
        edge_ent += weight * edge_entropy(pvec)
        u = rng.uniform(-1.0, 1.0, size=(per_atom, n))
        z, yprod = coupled_sample_many(tilted, u)
        dists.append(hamming(z, yprod).astype(float))
    d = np.concatenate(dists)
    beta_edge_sum = sum(abs(beta) * len(edges) for edges, beta in model.terms)
    report = HammingReport(
        mean_hamming=float(d.mean()),
        std_error=float(d.std(ddof=1) / np.sqrt(d.size)),
        theorem_bound=exponential_bound(model.num_vertices, eps, beta_edge_sum),
        entropy_graph=float(ent_graph),
        mixture_edge_entropy=float(edge_ent),
        entropy_slack_allowed=eps * pair_count(model.num_vertices),
    )
    return mixture, report
