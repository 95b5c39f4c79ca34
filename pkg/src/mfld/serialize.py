"""File formats shared by the CLI and tests.

Cube tables travel as JSON {"n": int, "values": [2^n floats], "kind":
"function" | "log_density"} in the fixed little-endian vertex encoding.
Graph models are {"N": int, "terms": [{"edges": [[u, v], ...], "beta": x}]}
with 1-based vertex labels; edge-list text files hold one "u v" pair per
line, also 1-based.  Gaussian mixtures are {"weights": [...], "centers":
[[...], ...]}.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .cube import CubeFunction, CubeMeasure
from .gaussian import GaussianMixture
from .graphs import SubgraphModel


def load_cube_function(path) -> CubeFunction:
    return CubeFunction.from_json(Path(path).read_text())


def load_cube_measure(path) -> CubeMeasure:
    text = Path(path).read_text()
    obj = json.loads(text)
    if obj.get("kind") == "function":
        return CubeMeasure(CubeFunction.from_json(text))
    return CubeMeasure.from_json(text)


def load_ising(path) -> tuple[np.ndarray, np.ndarray]:
    obj = json.loads(Path(path).read_text())
    a = np.asarray(obj["A"], dtype=float)
    b = np.asarray(obj.get("b", np.zeros(a.shape[0])), dtype=float)
    return a, b


def load_subgraph_model(path) -> SubgraphModel:
    obj = json.loads(Path(path).read_text())
    terms = []
    for term in obj["terms"]:
        edges = tuple((int(u) - 1, int(v) - 1) for u, v in term["edges"])
        terms.append((edges, float(term["beta"])))
    return SubgraphModel(num_vertices=int(obj["N"]), terms=tuple(terms))


def load_edge_list(path, num_vertices: int) -> np.ndarray:
    """(N, N) 0/1 adjacency from a 1-based 'u v' per line text file."""
    a = np.zeros((num_vertices, num_vertices), dtype=np.int64)
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        u, v = (int(tok) for tok in line.split())
        a[u - 1, v - 1] = a[v - 1, u - 1] = 1
    return a


def load_mixture(path) -> GaussianMixture:
    obj = json.loads(Path(path).read_text())
    return GaussianMixture(weights=obj["weights"], centers=obj["centers"])


def dump_json(obj) -> str:
    """Canonical JSON for primary outputs: sorted keys, stable float repr."""

    def default(o):
        if isinstance(o, np.ndarray):
            return o.tolist()
        if isinstance(o, (np.floating, np.integer)):
            return o.item()
        if isinstance(o, (bool, np.bool_)):
            return bool(o)
        raise TypeError(f"not serializable: {type(o)!r}")

    return json.dumps(obj, sort_keys=True, indent=2, default=default) + "\n"
