import itertools
import logging
from collections import Counter
from math import comb, log

import numpy as np
import pytest

from src.gala.clustering_eval import (
    ClusterAssignment,
    LinkSplit,
    accuracy,
    ari,
    auc_ap,
    clustering_affinity,
    edge_scores,
    evaluate_node_clustering,
    kmeans,
    nmi,
    sample_training_negatives,
    spectral_clustering,
    split_edges,
)
from src.gala.exceptions import ConfigError, GraphError, ShapeError
from src.gala.graph_ops import Graph
from tests.helpers import clique_edges, cycle_graph, two_cliques

# ============================================================================
# K-MEANS AND SPECTRAL CLUSTERING
# ============================================================================


def test_kmeans_two_well_separated_pairs():
    result = kmeans(np.array([[0.0], [0.1], [10.0], [10.1]]), k=2, seed=0)
    assert result.labels[0] == result.labels[1] != result.labels[2] == result.labels[3]
    assert result.inertia == pytest.approx(0.01)


def test_kmeans_with_one_cluster_per_point_has_zero_inertia(rng):
    points = rng.normal(size=(5, 2))
    result = kmeans(points, k=5, seed=1)
    assert sorted(result.labels.tolist()) == [0, 1, 2, 3, 4]
    assert result.inertia == pytest.approx(0.0, abs=1e-20)


def test_kmeans_duplicated_points_share_a_cluster():
    result = kmeans(np.array([[1.0, 1.0], [1.0, 1.0], [5.0, 5.0]]), k=2, seed=2)
    assert result.labels[0] == result.labels[1] != result.labels[2]
    assert result.inertia == pytest.approx(0.0, abs=1e-20)


def test_kmeans_rejects_bad_k():
    with pytest.raises(ConfigError):
        kmeans(np.zeros((3, 2)), k=4, seed=0)
    with pytest.raises(ConfigError):
        kmeans(np.zeros((3, 2)), k=0, seed=0)


def test_cluster_assignment_validates_labels():
    with pytest.raises(ConfigError):
        ClusterAssignment(labels=np.array([0, 1]), k=0)
    with pytest.raises(ConfigError):
        ClusterAssignment(labels=np.array([0, 2]), k=2)


def test_spectral_clustering_separates_two_cliques():
    g = two_cliques(5)
    result = spectral_clustering(g, 2, seed=0)
    assert accuracy(np.repeat([0, 1], 5), result) == 1.0


def test_spectral_clustering_three_triangles():
    edges = clique_edges(range(3)) + clique_edges(range(3, 6)) + clique_edges(range(6, 9))
    result = spectral_clustering(Graph.from_edges(9, edges), 3, seed=4)
    assert accuracy(np.repeat([0, 1, 2], 3), result) == 1.0


def test_spectral_clustering_single_cluster_and_errors():
    complete = Graph.from_edges(4, clique_edges(range(4)))
    np.testing.assert_array_equal(spectral_clustering(complete, 1, seed=0).labels, np.zeros(4))
    with pytest.raises(GraphError):
        spectral_clustering(complete, 5, seed=0)
    with pytest.raises(GraphError):
        spectral_clustering(complete, 0, seed=0)


# ============================================================================
# CLUSTERING METRICS
# ============================================================================


def test_accuracy_examples():
    assert accuracy([0, 0, 1, 1], [1, 1, 0, 0]) == 1.0
    assert accuracy([0, 0, 1, 1], [0, 1, 0, 1]) == 0.5
    assert accuracy([0, 0, 0], [0, 1, 2]) == pytest.approx(1 / 3)
    assert accuracy([0, 1, 2], [0, 0, 0]) == pytest.approx(1 / 3)
    with pytest.raises(ShapeError):
        accuracy([0, 1], [0])


def test_nmi_and_ari_examples():
    assert nmi([0, 0, 1, 1], [1, 1, 0, 0]) == pytest.approx(1.0)
    assert ari([0, 0, 1, 1], [1, 1, 0, 0]) == pytest.approx(1.0)
    assert nmi([0, 0, 1, 1], [0, 1, 0, 1]) == pytest.approx(0.0, abs=1e-12)
    assert ari([0, 0, 1, 1], [0, 1, 0, 1]) == pytest.approx(-0.5)


def set_partitions(n: int):
    """All labellings in restricted-growth form: each set partition of n items exactly once."""

    def grow(prefix, top):
        if len(prefix) == n:
            yield tuple(prefix)
            return
        for label in range(top + 2):
            yield from grow(prefix + [label], max(top, label))

    yield from grow([0], 0)


def pair_counting_ari(truth, pred) -> float:
    same_truth = same_pred = both = 0
    for i, j in itertools.combinations(range(len(truth)), 2):
        t, p = truth[i] == truth[j], pred[i] == pred[j]
        same_truth += t
        same_pred += p
        both += t and p
    total = comb(len(truth), 2)
    tp, fn, fp = both, same_truth - both, same_pred - both
    tn = total - tp - fn - fp
    if fn == 0 and fp == 0:
        return 1.0
    return 2.0 * (tp * tn - fn * fp) / ((tp + fn) * (fn + tn) + (tp + fp) * (fp + tn))


def entropy(labels) -> float:
    n = len(labels)
    return -sum(c / n * log(c / n) for c in Counter(labels).values())


def contingency_nmi(truth, pred) -> float:
    if len(set(truth)) == len(set(pred)) == 1:
        return 1.0
    n = len(truth)
    joint, a, b = Counter(zip(truth, pred)), Counter(truth), Counter(pred)
    mi = sum(c / n * log(c * n / (a[t] * b[p])) for (t, p), c in joint.items())
    if mi < 1e-15:
        return 0.0
    return mi / ((entropy(truth) + entropy(pred)) / 2)


def brute_force_accuracy(truth, pred) -> float:
    m = max(max(truth), max(pred)) + 1
    truth = np.asarray(truth)
    pred = np.asarray(pred)
    return max(float(np.mean(np.asarray(perm)[pred] == truth)) for perm in itertools.permutations(range(m)))


@pytest.mark.parametrize("n", [1, 2, 3, 4, 5, pytest.param(6, marks=pytest.mark.slow)])
def test_metrics_match_oracles_on_every_pair_of_partitions(n):
    partitions = list(set_partitions(n))
    for truth, pred in itertools.product(partitions, repeat=2):
        assert ari(truth, pred) == pytest.approx(pair_counting_ari(truth, pred), abs=1e-12)
        assert nmi(truth, pred) == pytest.approx(contingency_nmi(truth, pred), abs=1e-9)
        if n <= 5:
            assert accuracy(truth, pred) == pytest.approx(brute_force_accuracy(truth, pred), abs=1e-12)


def test_metrics_are_invariant_to_relabelling_clusters(rng):
    truth = rng.integers(0, 4, size=40)
    pred = rng.integers(0, 4, size=40)
    relabelled = rng.permutation(4)[pred]
    assert accuracy(truth, pred) == accuracy(truth, relabelled)
    assert nmi(truth, pred) == pytest.approx(nmi(truth, relabelled), abs=1e-12)
    assert ari(truth, pred) == pytest.approx(ari(truth, relabelled), abs=1e-12)


# ============================================================================
# NODE CLUSTERING PIPELINE
# ============================================================================


def one_hot_latents(classes: int = 3, size: int = 10):
    truth = np.repeat(np.arange(classes), size)
    return np.eye(classes)[truth], truth


def test_evaluate_recovers_one_hot_latents():
    h, truth = one_hot_latents()
    report = evaluate_node_clustering(h, truth, k_nn=5, k_clusters=None, seed=0, repeats=3)
    assert report.task == "clustering"
    assert set(report.metrics) == {"acc", "nmi", "ari"}
    assert report.metrics["acc"].mean == 1.0
    assert report.metrics["acc"].values == [1.0, 1.0, 1.0]
    assert report.metrics["nmi"].mean == pytest.approx(1.0)


def test_evaluate_with_subspace_affinity():
    h, truth = one_hot_latents()
    report = evaluate_node_clustering(h, truth, k_nn=5, k_clusters=3, seed=0, affinity="subspace")
    assert report.metrics["acc"].mean == 1.0


def test_evaluate_on_unrelated_labels_scores_low(rng):
    h = rng.normal(size=(60, 4))
    truth = rng.integers(0, 3, size=60)
    report = evaluate_node_clustering(h, truth, k_nn=10, k_clusters=3, seed=1, repeats=5)
    assert report.metrics["acc"].mean < 0.6


def test_evaluate_is_deterministic(rng):
    h = rng.normal(size=(30, 3))
    truth = np.repeat([0, 1, 2], 10)
    first = evaluate_node_clustering(h, truth, k_nn=5, k_clusters=3, seed=7, repeats=2)
    second = evaluate_node_clustering(h, truth, k_nn=5, k_clusters=3, seed=7, repeats=2)
    assert first == second


def test_clustering_affinity_shapes_and_errors():
    h, _ = one_hot_latents(2, 4)
    knn = clustering_affinity(h, k_nn=50)
    assert knn.n == 8
    subspace = clustering_affinity(h, k_nn=3, mode="subspace")
    dense = subspace.affinity.toarray()
    np.testing.assert_allclose(dense, dense.T)
    assert np.all(np.diag(dense) == 0)
    assert dense[0, 1] == pytest.approx(1 / 5)
    assert dense[0, 4] == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(ConfigError):
        clustering_affinity(h, k_nn=3, mode="cosine")
    with pytest.raises(ShapeError):
        evaluate_node_clustering(h, np.zeros(3), k_nn=3, k_clusters=2, seed=0)


# ============================================================================
# EDGE SPLITS AND LINK SCORING
# ============================================================================


def upper_keys(pairs) -> set[tuple[int, int]]:
    return {(int(min(i, j)), int(max(i, j))) for i, j in np.asarray(pairs).reshape(-1, 2)}


def test_split_sizes_follow_floor_of_fractions():
    split = split_edges(cycle_graph(20), 0.05, 0.10, seed=0)
    assert len(split.val_positive) == len(split.val_negative) == 1
    assert len(split.test_positive) == len(split.test_negative) == 2
    assert split.train_graph.edge_count == 17


def test_split_never_leaks_held_out_edges():
    g = cycle_graph(20)
    split = split_edges(g, 0.10, 0.20, seed=3)
    train = upper_keys(split.train_graph.upper_edges())
    val, test = upper_keys(split.val_positive), upper_keys(split.test_positive)
    negatives = upper_keys(split.val_negative) | upper_keys(split.test_negative)
    assert not train & val and not train & test and not val & test
    assert train | val | test == upper_keys(g.upper_edges())
    assert not negatives & upper_keys(g.upper_edges())
    assert len(negatives) == len(split.val_negative) + len(split.test_negative)


def test_split_is_deterministic_per_seed():
    g = cycle_graph(30)
    first, second = split_edges(g, 0.1, 0.1, seed=5), split_edges(g, 0.1, 0.1, seed=5)
    np.testing.assert_array_equal(first.test_positive, second.test_positive)
    np.testing.assert_array_equal(first.val_negative, second.val_negative)
    assert (first.train_graph.affinity != second.train_graph.affinity).nnz == 0


def test_split_errors():
    with pytest.raises(GraphError, match="non-edges"):
        split_edges(Graph.from_edges(5, clique_edges(range(5))), 0.1, 0.2, seed=0)
    with pytest.raises(GraphError, match="too few"):
        split_edges(Graph.from_edges(2, [(0, 1)]), 0.05, 0.1, seed=0)
    with pytest.raises(ConfigError):
        split_edges(cycle_graph(20), 0.5, 0.5, seed=0)


def test_training_negatives_avoid_train_and_held_out_pairs():
    split = split_edges(cycle_graph(20), 0.10, 0.20, seed=1)
    negatives = sample_training_negatives(split, 14, seed=2)
    assert len(negatives) == 14
    assert np.all(negatives[:, 0] < negatives[:, 1])
    drawn = upper_keys(negatives)
    assert len(drawn) == 14
    held_out = [split.val_positive, split.val_negative, split.test_positive, split.test_negative]
    forbidden = upper_keys(split.train_graph.upper_edges()).union(*(upper_keys(p) for p in held_out))
    assert not drawn & forbidden


def manual_split(test_positive) -> LinkSplit:
    none = np.zeros((0, 2), dtype=np.int64)
    return LinkSplit(
        train_graph=Graph.from_edges(4, [(0, 1), (1, 2), (2, 3)]),
        val_positive=np.array([[0, 2]]),
        val_negative=np.array([[0, 3]]),
        test_positive=np.asarray(test_positive, dtype=np.int64).reshape(-1, 2),
        test_negative=none,
        val_fraction=0.25,
        test_fraction=0.25,
    )


def test_training_negatives_are_capped_at_what_is_available(caplog):
    with caplog.at_level(logging.WARNING):
        negatives = sample_training_negatives(manual_split([]), 5, seed=0)
    np.testing.assert_array_equal(negatives, [[1, 3]])
    assert "Only 1" in caplog.text
    with pytest.raises(GraphError):
        sample_training_negatives(manual_split([[1, 3]]), 1, seed=0)


def test_edge_scores():
    h = np.array([[1.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    np.testing.assert_allclose(edge_scores(h, [[0, 1], [0, 2]]), [1 / (1 + np.exp(-1.0)), 0.5])


def test_auc_ap_examples():
    assert auc_ap([0.9, 0.8], [0.1, 0.2]) == (1.0, 1.0)
    auc, _ = auc_ap([0.5, 0.5], [0.5, 0.5])
    assert auc == 0.5
    auc, ap = auc_ap([0.1], [0.9])
    assert auc == 0.0
    assert ap == pytest.approx(0.5)
    with pytest.raises(ConfigError):
        auc_ap([], [0.1])


def test_auc_matches_pairwise_comparison():
    rng = np.random.default_rng(17)
    for _ in range(100):
        pos = rng.integers(0, 5, size=int(rng.integers(1, 20))).astype(float)
        neg = rng.integers(0, 5, size=int(rng.integers(1, 20))).astype(float)
        wins = (pos[:, None] > neg[None, :]).sum() + 0.5 * (pos[:, None] == neg[None, :]).sum()
        auc, ap = auc_ap(pos, neg)
        assert auc == pytest.approx(wins / (len(pos) * len(neg)), abs=1e-12)
        assert 0.0 < ap <= 1.0
