"""Spectral clustering, clustering metrics, edge splits and link-prediction scoring."""

import logging
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linear_sum_assignment
from scipy.special import expit
from sklearn.cluster import KMeans
from sklearn.metrics import (
    adjusted_rand_score,
    average_precision_score,
    normalized_mutual_info_score,
    roc_auc_score,
)
from sklearn.metrics.cluster import contingency_matrix

from .config import derive_seed
from .constants import KMEANS_MAX_ITER, KMEANS_RESTARTS, KMEANS_TOL, STREAM_CLUSTERING
from .exceptions import ConfigError, GraphError, ShapeError
from .formatters import summarize
from .graph_ops import Graph, degree_vector, knn_graph
from .linalg import as_dense, sym_eig
from .models import MetricsReport, SubspaceConfig
from .objectives import optimal_affinity

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ClusterAssignment:
    """Hard cluster labels in [0, k)."""

    labels: np.ndarray
    k: int
    centroids: np.ndarray | None = None
    inertia: float | None = None

    def __post_init__(self):
        if self.k < 1:
            raise ConfigError(f"cluster count must be >= 1, got {self.k}")
        if len(self.labels) and (self.labels.min() < 0 or self.labels.max() >= self.k):
            raise ConfigError(f"cluster labels must lie in [0, {self.k})")


@dataclass(frozen=True)
class LinkSplit:
    """Training graph plus held-out positive and negative pairs (i < j)."""

    train_graph: Graph
    val_positive: np.ndarray
    val_negative: np.ndarray
    test_positive: np.ndarray
    test_negative: np.ndarray
    val_fraction: float
    test_fraction: float


# ============================================================================
# CLUSTERING
# ============================================================================


def kmeans(points: np.ndarray, k: int, seed: int, restarts: int = KMEANS_RESTARTS) -> ClusterAssignment:
    """
    Lloyd k-means with k-means++ seeding; the restart with the lowest inertia wins.

    Args:
        points: n x d matrix
        k: Cluster count, 1 <= k <= n
        seed: Seed for the seeding of every restart
        restarts: Number of k-means++ restarts

    Returns:
        ClusterAssignment with centroids and inertia
    """
    points = as_dense(points, "points")
    n = points.shape[0]
    if k < 1 or k > n:
        raise ConfigError(f"k-means needs 1 <= k <= n, got k={k}, n={n}")
    model = KMeans(
        n_clusters=k,
        init="k-means++",
        n_init=restarts,
        max_iter=KMEANS_MAX_ITER,
        tol=KMEANS_TOL,
        random_state=seed,
    )
    labels = model.fit_predict(points)
    return ClusterAssignment(
        labels=labels.astype(np.int64),
        k=k,
        centroids=model.cluster_centers_,
        inertia=float(model.inertia_),
    )


def spectral_embedding(g: Graph, k: int) -> np.ndarray:
    """Top-k eigenvectors of D^{-1/2}AD^{-1/2}, rows scaled to unit length (zero rows stay zero)."""
    degrees = degree_vector(g)
    inv_sqrt = np.zeros_like(degrees)
    positive = degrees > 0
    inv_sqrt[positive] = 1.0 / np.sqrt(degrees[positive])
    scaling = sp.diags(inv_sqrt)
    normalized = (scaling @ g.affinity @ scaling).toarray()

    vectors = sym_eig(normalized).eigenvectors[:, :k]
    norms = np.linalg.norm(vectors, axis=1, keepdims=True)
    return np.divide(vectors, norms, out=np.zeros_like(vectors), where=norms > 0)


def spectral_clustering(g: Graph, k: int, seed: int) -> ClusterAssignment:
    """
    Normalized spectral clustering followed by k-means on the embedded rows.

    Args:
        g: Affinity graph
        k: Cluster count (k = 1 puts every node in one cluster)
        seed: k-means seed

    Returns:
        ClusterAssignment
    """
    if k < 1 or k > g.n:
        raise GraphError(f"spectral clustering needs 1 <= k <= n, got k={k}, n={g.n}")
    if k == 1:
        return ClusterAssignment(labels=np.zeros(g.n, dtype=np.int64), k=1)
    return kmeans(spectral_embedding(g, k), k, seed)


# ============================================================================
# METRICS
# ============================================================================


def _label_arrays(truth, pred) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(pred, ClusterAssignment):
        pred = pred.labels
    truth = np.asarray(truth)
    pred = np.asarray(pred)
    if truth.shape != pred.shape:
        raise ShapeError(f"{len(truth)} true labels vs {len(pred)} predicted labels")
    return truth, pred


def accuracy(truth, pred) -> float:
    """Fraction of nodes matched under the best one-to-one cluster-to-class mapping."""
    truth, pred = _label_arrays(truth, pred)
    if truth.size == 0:
        raise ShapeError("accuracy of an empty labelling is undefined")
    counts = contingency_matrix(truth, pred)
    rows, cols = linear_sum_assignment(counts, maximize=True)
    return float(counts[rows, cols].sum()) / truth.size


def nmi(truth, pred) -> float:
    """Normalized mutual information, arithmetic-mean normalization."""
    truth, pred = _label_arrays(truth, pred)
    return float(normalized_mutual_info_score(truth, pred, average_method="arithmetic"))


def ari(truth, pred) -> float:
    """Adjusted Rand index."""
    truth, pred = _label_arrays(truth, pred)
    return float(adjusted_rand_score(truth, pred))


def clustering_scores(truth, pred) -> dict[str, float]:
    return {"acc": accuracy(truth, pred), "nmi": nmi(truth, pred), "ari": ari(truth, pred)}


def clustering_affinity(
    h: np.ndarray,
    k_nn: int,
    mode: str = "knn",
    subspace: SubspaceConfig | None = None,
) -> Graph:
    """
    Affinity graph built from latent rows.

    Args:
        h: n x k latent matrix
        k_nn: Neighbour count for mode "knn" (capped at n - 1)
        mode: "knn" or "subspace" ((|A*| + |A*|ᵀ)/2 with zero diagonal)
        subspace: Cost weights for mode "subspace"

    Returns:
        Graph
    """
    h = as_dense(h, "latent")
    if mode == "knn":
        return knn_graph(h, min(k_nn, h.shape[0] - 1))
    if mode == "subspace":
        affinity = np.abs(optimal_affinity(h.T, subspace or SubspaceConfig()))
        affinity = 0.5 * (affinity + affinity.T)
        np.fill_diagonal(affinity, 0.0)
        return Graph.from_dense(affinity)
    raise ConfigError(f"Unknown clustering affinity: {mode!r}")


def evaluate_node_clustering(
    h: np.ndarray,
    truth: np.ndarray,
    k_nn: int,
    k_clusters: int | None,
    seed: int,
    repeats: int = 1,
    affinity: str = "knn",
    subspace: SubspaceConfig | None = None,
    config: dict | None = None,
) -> MetricsReport:
    """
    Cluster latent rows and score against ground truth.

    Each repeat re-seeds k-means from the "clustering" substream of `seed`.

    Args:
        h: n x k latent matrix
        truth: True class per node
        k_nn: Neighbour count of the k-NN affinity
        k_clusters: Cluster count (defaults to the number of true classes)
        seed: Master seed
        repeats: Clustering repetitions
        affinity: "knn" or "subspace"
        subspace: Cost weights for the subspace affinity
        config: Config echo for the report

    Returns:
        MetricsReport with acc, nmi and ari summaries
    """
    truth = np.asarray(truth)
    h = as_dense(h, "latent")
    if len(truth) != h.shape[0]:
        raise ShapeError(f"{len(truth)} labels for {h.shape[0]} latent rows")
    k = k_clusters or len(np.unique(truth))
    graph = clustering_affinity(h, k_nn, affinity, subspace)

    runs = {"acc": [], "nmi": [], "ari": []}
    for r in range(repeats):
        assignment = spectral_clustering(graph, k, derive_seed(seed, STREAM_CLUSTERING, r))
        for name, value in clustering_scores(truth, assignment).items():
            runs[name].append(value)
    logger.debug("Clustering over %d repeats: mean acc %.4f", repeats, np.mean(runs["acc"]))
    return MetricsReport(
        task="clustering",
        metrics={name: summarize(values) for name, values in runs.items()},
        seed=seed,
        config=config or {},
    )


# ============================================================================
# LINK PREDICTION
# ============================================================================


def _pair_key(n: int, pairs: np.ndarray) -> np.ndarray:
    lo = np.minimum(pairs[:, 0], pairs[:, 1])
    hi = np.maximum(pairs[:, 0], pairs[:, 1])
    return lo * n + hi


def _sample_non_edges(
    n: int,
    forbidden: set[int],
    count: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """Rejection-sample `count` distinct unordered non-self pairs whose keys avoid `forbidden`."""
    chosen: list[tuple[int, int]] = []
    taken = set(forbidden)
    while len(chosen) < count:
        i, j = rng.integers(0, n, size=2)
        if i == j:
            continue
        lo, hi = (int(i), int(j)) if i < j else (int(j), int(i))
        key = lo * n + hi
        if key in taken:
            continue
        taken.add(key)
        chosen.append((lo, hi))
    return np.asarray(chosen, dtype=np.int64).reshape(-1, 2)


def split_edges(g: Graph, val_frac: float, test_frac: float, seed: int) -> LinkSplit:
    """
    Hold out floor(E·val_frac) validation and floor(E·test_frac) test edges.

    Negatives of equal count are drawn without replacement from non-edges of `g`.

    Args:
        g: Original graph
        val_frac: Validation fraction of edges
        test_frac: Test fraction of edges
        seed: Split seed

    Returns:
        LinkSplit
    """
    if not (0 < val_frac < 1 and 0 < test_frac < 1 and val_frac + test_frac < 1):
        raise ConfigError(f"invalid split fractions val={val_frac}, test={test_frac}")
    edges = g.upper_edges()
    total = len(edges)
    num_val = int(np.floor(total * val_frac))
    num_test = int(np.floor(total * test_frac))
    if num_val == 0 or num_test == 0:
        raise GraphError(
            f"{total} edges are too few for val={val_frac}, test={test_frac} "
            f"({num_val} val / {num_test} test edges)"
        )
    non_edges = g.n * (g.n - 1) // 2 - total
    if non_edges < num_val + num_test:
        raise GraphError(f"graph has {non_edges} non-edges, need {num_val + num_test} negatives")

    rng = np.random.default_rng(seed)
    order = rng.permutation(total)
    test_pos = edges[np.sort(order[:num_test])]
    val_pos = edges[np.sort(order[num_test:num_test + num_val])]
    train_idx = np.sort(order[num_test + num_val:])

    weights = np.asarray(g.affinity[edges[train_idx, 0], edges[train_idx, 1]]).ravel()
    train_graph = Graph.from_edges(g.n, edges[train_idx], weights)

    negatives = _sample_non_edges(g.n, set(_pair_key(g.n, edges).tolist()), num_test + num_val, rng)
    logger.info(
        "Split %d edges: %d train, %d val, %d test", total, len(train_idx), num_val, num_test
    )
    return LinkSplit(
        train_graph=train_graph,
        val_positive=val_pos,
        val_negative=negatives[num_test:],
        test_positive=test_pos,
        test_negative=negatives[:num_test],
        val_fraction=val_frac,
        test_fraction=test_frac,
    )


def sample_training_negatives(split: LinkSplit, count: int, seed: int) -> np.ndarray:
    """
    Uniform non-edges of the training graph that are not held-out pairs.

    Args:
        split: Edge split; its val/test pairs never become training negatives
        count: Requested negatives (capped at the number available)
        seed: Sampling seed

    Returns:
        (count, 2) array of pairs with i < j
    """
    g = split.train_graph
    held_out = np.vstack([split.val_positive, split.val_negative, split.test_positive, split.test_negative])
    forbidden = set(_pair_key(g.n, g.upper_edges()).tolist()) | set(_pair_key(g.n, held_out).tolist())
    available = g.n * (g.n - 1) // 2 - len(forbidden)
    if available == 0:
        raise GraphError("no pairs left to sample training negatives from")
    if available < count:
        logger.warning("Only %d training negatives available, %d requested", available, count)
        count = available
    return _sample_non_edges(g.n, forbidden, count, np.random.default_rng(seed))


def edge_scores(h: np.ndarray, pairs: np.ndarray) -> np.ndarray:
    """sigmoid(h_i·h_j) per pair."""
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    return expit(np.einsum("ij,ij->i", h[pairs[:, 0]], h[pairs[:, 1]]))


def auc_ap(scores_pos, scores_neg) -> tuple[float, float]:
    """
    Area under the ROC curve (ties count ½) and average precision.

    Args:
        scores_pos: Scores of true edges
        scores_neg: Scores of non-edges

    Returns:
        (auc, ap)
    """
    pos = np.asarray(scores_pos, dtype=np.float64).ravel()
    neg = np.asarray(scores_neg, dtype=np.float64).ravel()
    if pos.size == 0 or neg.size == 0:
        raise ConfigError("AUC/AP need nonempty positive and negative score lists")
    scores = np.concatenate([pos, neg])
    targets = np.concatenate([np.ones(pos.size), np.zeros(neg.size)])
    return float(roc_auc_score(targets, scores)), float(average_precision_score(targets, scores))
