"""Vertex encoding for the discrete cube {-1,1}^n.

The whole package uses one fixed little-endian encoding: a vertex is an
integer index in [0, 2^n), and bit i of the index is 1 exactly when
coordinate i equals +1.  All dense tables (functions, log-densities,
gradients) are indexed this way, and the serialized JSON formats inherit it.
"""
from __future__ import annotations

import numpy as np

MAX_N = 20


def check_dimension(n: int) -> int:
    if not isinstance(n, (int, np.integer)) or n < 1 or n > MAX_N:
        raise ValueError(f"dimension must be an integer in [1, {MAX_N}], got {n!r}")
    return int(n)


def sign_matrix(n: int) -> np.ndarray:
    """All 2^n vertices as a (2^n, n) array of +-1 (int8), row y = vertex y."""
    n = check_dimension(n)
    idx = np.arange(1 << n, dtype=np.uint32)
    out = np.empty((1 << n, n), dtype=np.int8)
    for i in range(n):
        out[:, i] = np.where((idx >> i) & 1, 1, -1)
    return out


def vertex_to_signs(y: int, n: int) -> np.ndarray:
    """Coordinates of vertex index y as a +-1 vector of length n."""
    return np.where((y >> np.arange(n)) & 1, 1.0, -1.0)


def signs_to_vertex(s: np.ndarray) -> int:
    """Inverse of :func:`vertex_to_signs`; positive coordinates set bits."""
    s = np.asarray(s)
    bits = (s > 0).astype(np.uint64)
    return int((bits << np.arange(len(s), dtype=np.uint64)).sum())


def popcount(idx: np.ndarray) -> np.ndarray:
    """Number of set bits per entry (number of +1 coordinates)."""
    x = np.asarray(idx, dtype=np.uint64).copy()
    c = np.zeros_like(x)
    while x.any():
        c += x & 1
        x >>= np.uint64(1)
    return c


def hamming(a, b) -> np.ndarray:
    """Hamming distance between vertex indices (broadcasts)."""
    return popcount(np.bitwise_xor(np.asarray(a, dtype=np.uint64),
                                   np.asarray(b, dtype=np.uint64)))


def weight_vector(x: np.ndarray) -> np.ndarray:
    """Product weights w(x, y) = prod_i (1 + x_i y_i)/2 for all 2^n vertices.

    Built by doubling: after coordinate i the table covers bits 0..i.  At a
    vertex x the weights concentrate on that vertex; at x = 0 they are the
    uniform 2^-n.
    """
    x = np.asarray(x, dtype=float)
    w = np.ones(1)
    for xi in x:
        w = np.concatenate([w * ((1.0 - xi) / 2.0), w * ((1.0 + xi) / 2.0)])
    return w


def flip_indices(n: int, i: int) -> tuple[np.ndarray, np.ndarray]:
    """(minus, plus) index arrays: vertex with bit i cleared / set."""
    idx = np.arange(1 << n)
    bit = 1 << i
    return idx & ~bit, idx | bit
