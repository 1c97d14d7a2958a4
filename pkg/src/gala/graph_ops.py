"""Graphs, Laplacians and the smoothing / sharpening propagation operators."""

from dataclasses import dataclass
from functools import cached_property
from typing import Literal, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.spatial.distance import cdist

from .constants import NAIVE_SHARPENING, SMOOTHING, STABLE_SHARPENING
from .exceptions import GraphError
from .linalg import as_csr, as_dense, densify, spmm, sym_eig

OperatorKind = Literal["smoothing", "naive_sharpening", "stable_sharpening"]
LaplacianFlavor = Literal["unnormalized", "symmetric", "random_walk"]


@dataclass(frozen=True)
class Graph:
    """Undirected weighted graph: symmetric, nonnegative, zero-diagonal affinity."""

    n: int
    affinity: sp.csr_matrix

    def __post_init__(self):
        a = self.affinity
        if a.shape != (self.n, self.n):
            raise GraphError(f"affinity shape {a.shape} does not match n={self.n}")
        if a.nnz:
            if np.any(a.data < 0):
                raise GraphError("affinity weights must be nonnegative")
            if np.any(a.diagonal() != 0):
                raise GraphError("affinity must have a zero diagonal")
            if abs(a - a.T).max() > 1e-12:
                raise GraphError("affinity must be symmetric")

    @classmethod
    def from_edges(
        cls,
        n: int,
        edges: Sequence[tuple[int, int]],
        weights: Sequence[float] | None = None,
    ) -> "Graph":
        """Build an undirected graph; each (i, j) pair sets both directions."""
        edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        values = np.ones(len(edges)) if weights is None else np.asarray(weights, dtype=np.float64)
        if len(edges) and (edges.min() < 0 or edges.max() >= n):
            raise GraphError(f"edge endpoint outside [0, {n})")
        if np.any(edges[:, 0] == edges[:, 1]):
            raise GraphError("self-loops are not allowed in a Graph")
        rows = np.concatenate([edges[:, 0], edges[:, 1]])
        cols = np.concatenate([edges[:, 1], edges[:, 0]])
        data = np.concatenate([values, values])

        # duplicates keep the maximum weight
        keys = rows * n + cols
        order = np.lexsort((-data, keys))
        first = np.ones(len(order), dtype=bool)
        first[1:] = keys[order][1:] != keys[order][:-1]
        keep = order[first]
        csr = sp.csr_matrix((data[keep], (rows[keep], cols[keep])), shape=(n, n))
        return cls(n=n, affinity=as_csr(csr))

    @classmethod
    def from_dense(cls, a: np.ndarray) -> "Graph":
        """Build a graph from a dense affinity matrix."""
        a = as_dense(a, "affinity")
        if a.shape[0] != a.shape[1]:
            raise GraphError(f"affinity must be square, got {a.shape}")
        return cls(n=a.shape[0], affinity=as_csr(a))

    @property
    def edge_count(self) -> int:
        """Number of undirected edges."""
        return int(sp.triu(self.affinity, k=1).nnz)

    def upper_edges(self) -> np.ndarray:
        """Undirected edges as (i, j) rows with i < j, sorted."""
        upper = sp.triu(self.affinity, k=1).tocoo()
        edges = np.column_stack([upper.row, upper.col]).astype(np.int64)
        order = np.lexsort((edges[:, 1], edges[:, 0]))
        return edges[order]


@dataclass(frozen=True)
class PropagationOperator:
    """Fixed sparse matrix applied to the left of a layer's activations."""

    kind: OperatorKind
    matrix: sp.csr_matrix

    @cached_property
    def transpose(self) -> sp.csr_matrix:
        return as_csr(self.matrix.T)

    def apply(self, h: np.ndarray) -> np.ndarray:
        return spmm(self.matrix, h)


def degree_vector(g: Graph) -> np.ndarray:
    """Row sums of the affinity matrix."""
    return np.asarray(g.affinity.sum(axis=1), dtype=np.float64).ravel()


def _require_positive_degrees(g: Graph, what: str) -> np.ndarray:
    degrees = degree_vector(g)
    isolated = np.flatnonzero(degrees <= 0)
    if len(isolated):
        raise GraphError(f"{what} requires positive degrees; zero-degree nodes: {isolated.tolist()}")
    return degrees


def laplacian(g: Graph, flavor: LaplacianFlavor = "symmetric") -> sp.csr_matrix:
    """
    Graph Laplacian.

    Args:
        g: Graph
        flavor: "unnormalized" (D - A), "symmetric" (I - D^-1/2 A D^-1/2)
            or "random_walk" (I - D^-1 A)

    Returns:
        Sparse Laplacian
    """
    identity = sp.identity(g.n, format="csr")
    if flavor == "unnormalized":
        return as_csr(sp.diags(degree_vector(g)) - g.affinity)
    if flavor == "symmetric":
        inv_sqrt = sp.diags(1.0 / np.sqrt(_require_positive_degrees(g, "symmetric Laplacian")))
        return as_csr(identity - inv_sqrt @ g.affinity @ inv_sqrt)
    if flavor == "random_walk":
        inv = sp.diags(1.0 / _require_positive_degrees(g, "random-walk Laplacian"))
        return as_csr(identity - inv @ g.affinity)
    raise ValueError(f"Unknown Laplacian flavor: {flavor!r}")


def _normalized_with_self_loop(g: Graph, self_loop: float, sign: float) -> sp.csr_matrix:
    """D'^-1/2 (self_loop·I + sign·A) D'^-1/2 with D' = D + |self_loop|·I."""
    degrees = degree_vector(g) + abs(self_loop)
    inv_sqrt = sp.diags(1.0 / np.sqrt(degrees))
    adjusted = self_loop * sp.identity(g.n, format="csr") + sign * g.affinity
    return as_csr(inv_sqrt @ adjusted @ inv_sqrt)


def smoothing_operator(g: Graph) -> PropagationOperator:
    """Renormalized GCN smoothing D̃^-1/2 Ã D̃^-1/2 with Ã = A + I."""
    return PropagationOperator(kind=SMOOTHING, matrix=_normalized_with_self_loop(g, 1.0, 1.0))


def naive_sharpening_operator(g: Graph) -> PropagationOperator:
    """Laplacian sharpening 2I - D^-1/2 A D^-1/2 (spectral radius up to 3)."""
    degrees = _require_positive_degrees(g, "naive sharpening")
    inv_sqrt = sp.diags(1.0 / np.sqrt(degrees))
    matrix = 2.0 * sp.identity(g.n, format="csr") - inv_sqrt @ g.affinity @ inv_sqrt
    return PropagationOperator(kind=NAIVE_SHARPENING, matrix=as_csr(matrix))


def stable_sharpening_operator(g: Graph) -> PropagationOperator:
    """
    Signed-graph sharpening D̂^-1/2 Â D̂^-1/2.

    Â = 2I - A and D̂_ii = Σ_j |Â_ij| = D_ii + 2, so the spectral radius is at most 1.
    """
    return PropagationOperator(
        kind=STABLE_SHARPENING, matrix=_normalized_with_self_loop(g, 2.0, -1.0)
    )


def first_order_operator(g: Graph) -> sp.csr_matrix:
    """Un-renormalized first-order convolution I + D^-1/2 A D^-1/2 (radius up to 2)."""
    degrees = _require_positive_degrees(g, "first-order operator")
    inv_sqrt = sp.diags(1.0 / np.sqrt(degrees))
    return as_csr(sp.identity(g.n, format="csr") + inv_sqrt @ g.affinity @ inv_sqrt)


def build_operator(g: Graph, kind: OperatorKind) -> PropagationOperator:
    """Construct the propagation operator of the given kind."""
    builders = {
        SMOOTHING: smoothing_operator,
        NAIVE_SHARPENING: naive_sharpening_operator,
        STABLE_SHARPENING: stable_sharpening_operator,
    }
    if kind not in builders:
        raise ValueError(f"Unknown operator kind: {kind!r}")
    return builders[kind](g)


def spectral_radius(p: PropagationOperator | sp.spmatrix) -> float:
    """Largest absolute eigenvalue of a symmetric operator."""
    matrix = p.matrix if isinstance(p, PropagationOperator) else p
    if matrix.shape[0] == 0:
        raise GraphError("spectral radius of an empty operator is undefined")
    eigenvalues = sym_eig(densify(matrix)).eigenvalues
    return float(np.max(np.abs(eigenvalues)))


def smooth_features(g: Graph, x: np.ndarray, gamma: float = 1.0) -> np.ndarray:
    """One Laplacian smoothing step X - γ(I - D̃^-1 Ã)X, 0 < γ <= 1."""
    if not 0.0 < gamma <= 1.0:
        raise ValueError(f"gamma must be in (0, 1], got {gamma}")
    x = as_dense(x, "features")
    tilde = g.affinity + sp.identity(g.n, format="csr")
    averaged = spmm(sp.diags(1.0 / (degree_vector(g) + 1.0)) @ tilde, x)
    return (1.0 - gamma) * x + gamma * averaged


def sharpen_features(g: Graph, x: np.ndarray, gamma: float = 1.0) -> np.ndarray:
    """One Laplacian sharpening step X + γ(I - D^-1 A)X."""
    if gamma <= 0.0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    x = as_dense(x, "features")
    return x + gamma * spmm(laplacian(g, "random_walk"), x)


def propagation_growth(p: PropagationOperator, x: np.ndarray, steps: int) -> list[float]:
    """
    Frobenius norms of P^t X for t = 0..steps.

    Stops early, appending inf, at the first step that overflows.
    """
    h = as_dense(x, "features")
    norms = [float(np.linalg.norm(h))]
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(steps):
            h = np.asarray(p.matrix @ h)
            norm = float(np.linalg.norm(h))
            if not np.isfinite(norm):
                norms.append(float("inf"))
                break
            norms.append(norm)
    return norms


def knn_graph(points: np.ndarray, k: int) -> Graph:
    """
    Unit-weight k-nearest-neighbor graph, symmetrized by union.

    Args:
        points: n x d matrix, one point per row
        k: Neighbors per node, 1 <= k < n (ties broken by lower index)

    Returns:
        Graph with an edge wherever either endpoint selected the other
    """
    points = as_dense(points, "points")
    n = points.shape[0]
    if k < 1 or k >= n:
        raise GraphError(f"k-NN requires 1 <= k < n, got k={k}, n={n}")

    distances = cdist(points, points, metric="sqeuclidean")
    np.fill_diagonal(distances, np.inf)
    neighbors = np.argsort(distances, axis=1, kind="stable")[:, :k]

    rows = np.repeat(np.arange(n), k)
    cols = neighbors.ravel()
    selected = sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
    union = (selected + selected.T).sign()
    return Graph(n=n, affinity=as_csr(union))
