"""Dataset loading from edge lists and CSV files, synthetic graphs, and TSV export."""

import logging
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd
import scipy.sparse as sp

from .exceptions import DataFormatError, GraphError
from .graph_ops import Graph, knn_graph
from .linalg import as_dense
from .models import SbmSpec

logger = logging.getLogger(__name__)

NODES_HEADER = re.compile(r"^#\s*nodes:\s*(\d+)\s*$")


@dataclass(frozen=True)
class TrainingData:
    """What the trainer sees: features and the graph the operators are built from. No labels."""

    features: np.ndarray
    graph: Graph


@dataclass(frozen=True)
class Dataset:
    """Feature matrix with optional graph and optional integer labels."""

    features: np.ndarray
    affinity: Graph | None = None
    labels: np.ndarray | None = None
    name: str = "dataset"

    def __post_init__(self):
        n = self.features.shape[0]
        if self.affinity is not None and self.affinity.n != n:
            raise GraphError(f"{self.name}: graph has {self.affinity.n} nodes, features have {n} rows")
        if self.labels is not None:
            if len(self.labels) != n:
                raise DataFormatError(f"{self.name}: {len(self.labels)} labels for {n} nodes")
            if len(self.labels) and self.labels.min() < 0:
                raise DataFormatError(f"{self.name}: labels must be nonnegative")

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def num_classes(self) -> int:
        return int(self.labels.max()) + 1 if self.labels is not None and len(self.labels) else 0

    def training_view(self, k_nn: int) -> TrainingData:
        """
        Features plus graph for training.

        Feature-only datasets get a k-NN graph built on the raw features.
        """
        graph = self.affinity
        if graph is None:
            k = min(k_nn, self.n - 1)
            logger.info("%s has no graph; building a %d-NN graph on raw features", self.name, k)
            graph = knn_graph(self.features, k)
        return TrainingData(features=self.features, graph=graph)


# ============================================================================
# LOADERS
# ============================================================================


def load_edge_list(path: str | Path, n: int | None = None) -> Graph:
    """
    Load an undirected graph from "src dst [weight]" lines.

    Args:
        path: Edge-list file; 0-based ids, '#' starts a comment
        n: Node count; defaults to a "# nodes: N" header, else the largest id + 1

    Returns:
        Symmetric Graph (duplicates keep the max weight, self-loops dropped)
    """
    directed: dict[tuple[int, int], float] = {}
    self_loops = 0
    max_id = -1
    header_nodes = None

    with open(path, encoding="utf-8") as f:
        for line_number, raw in enumerate(f, start=1):
            match = NODES_HEADER.match(raw)
            if match:
                header_nodes = int(match.group(1))
                continue
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            tokens = line.split()
            if len(tokens) not in (2, 3):
                raise DataFormatError(f"{path}:{line_number}: expected 'src dst [weight]', got {raw.strip()!r}")
            try:
                src, dst = int(tokens[0]), int(tokens[1])
                weight = float(tokens[2]) if len(tokens) == 3 else 1.0
            except ValueError:
                raise DataFormatError(f"{path}:{line_number}: non-numeric field in {raw.strip()!r}")
            if src < 0 or dst < 0:
                raise DataFormatError(f"{path}:{line_number}: node ids must be nonnegative")
            if not np.isfinite(weight) or weight < 0:
                raise DataFormatError(f"{path}:{line_number}: weight must be finite and nonnegative, got {weight}")
            max_id = max(max_id, src, dst)
            if src == dst:
                self_loops += 1
                continue
            directed[(src, dst)] = max(weight, directed.get((src, dst), 0.0))

    if self_loops:
        logger.warning("%s: dropped %d self-loop(s)", path, self_loops)
    asymmetric = sum(
        1 for (i, j), w in directed.items() if i < j and (j, i) in directed and directed[(j, i)] != w
    )
    if asymmetric:
        logger.warning("%s: %d pair(s) had different weights per direction; symmetrized by max", path, asymmetric)

    if n is not None:
        node_count = n
    elif header_nodes is not None:
        node_count = header_nodes
    else:
        node_count = max_id + 1
    if max_id >= node_count:
        raise DataFormatError(f"{path}: node id {max_id} out of range for {node_count} nodes")
    edges = list(directed.keys())
    weights = list(directed.values())
    graph = Graph.from_edges(node_count, edges, weights)
    logger.info("Loaded graph with %d nodes and %d edges from %s", graph.n, graph.edge_count, path)
    return graph


def _read_csv_cells(path: str | Path) -> pd.DataFrame:
    try:
        return pd.read_csv(path, header=None, dtype=str, keep_default_na=False, skip_blank_lines=True)
    except pd.errors.EmptyDataError:
        return pd.DataFrame()
    except pd.errors.ParserError as e:
        raise DataFormatError(f"{path}: ragged rows ({e})")


def load_features_csv(path: str | Path) -> np.ndarray:
    """
    Load a comma-separated numeric feature matrix, one node per row.

    Args:
        path: CSV file without header

    Returns:
        n x d float64 matrix
    """
    cells = _read_csv_cells(path)
    if cells.empty:
        return np.zeros((0, 0))
    blank = cells.apply(lambda column: column.str.strip() == "") | cells.isna()
    if blank.any(axis=None):
        row = int(np.flatnonzero(blank.any(axis=1).to_numpy())[0])
        raise DataFormatError(f"{path}: ragged or empty field at row {row}")
    numeric = cells.apply(pd.to_numeric, errors="coerce")
    bad = numeric.isna() | ~np.isfinite(numeric.fillna(0.0))
    if bad.any(axis=None):
        row, col = np.argwhere(bad.to_numpy())[0]
        raise DataFormatError(f"{path}: non-numeric value {cells.iat[row, col]!r} at row {row}, column {col}")
    logger.info("Loaded %d x %d features from %s", numeric.shape[0], numeric.shape[1], path)
    return np.ascontiguousarray(numeric.to_numpy(dtype=np.float64))


def load_labels_csv(path: str | Path) -> np.ndarray:
    """Load one nonnegative integer label per line."""
    cells = _read_csv_cells(path)
    if cells.empty:
        return np.zeros(0, dtype=np.int64)
    if cells.shape[1] != 1:
        raise DataFormatError(f"{path}: expected one label per line, got {cells.shape[1]} columns")
    labels = pd.to_numeric(cells[0].str.strip(), errors="coerce")
    invalid = labels.isna() | (labels < 0) | (labels != labels.round())
    if invalid.any():
        row = int(np.flatnonzero(invalid.to_numpy())[0])
        raise DataFormatError(f"{path}: invalid label {cells.iat[row, 0]!r} at row {row}")
    return labels.to_numpy(dtype=np.int64)


def load_dataset(
    features_path: str | Path,
    edges_path: str | Path | None = None,
    labels_path: str | Path | None = None,
    name: str = "dataset",
) -> Dataset:
    """Load features plus optional edge list and labels."""
    features = load_features_csv(features_path)
    graph = load_edge_list(edges_path, n=features.shape[0]) if edges_path else None
    labels = load_labels_csv(labels_path) if labels_path else None
    return Dataset(features=features, affinity=graph, labels=labels, name=name)


# ============================================================================
# SYNTHETIC DATA
# ============================================================================


def sbm_generate(spec: SbmSpec) -> Dataset:
    """
    Sample a stochastic block model with one-hot-plus-Gaussian features.

    Args:
        spec: Block sizes, edge probabilities, feature noise and seed

    Returns:
        Dataset whose labels are the block ids
    """
    rng = np.random.default_rng(spec.seed)
    labels = np.repeat(np.arange(len(spec.block_sizes)), spec.block_sizes)
    n = len(labels)

    same_block = labels[:, None] == labels[None, :]
    probabilities = np.where(same_block, spec.p_in, spec.p_out)
    draws = rng.random((n, n))
    upper = np.triu(draws < probabilities, k=1)
    edges = np.argwhere(upper)

    one_hot = np.eye(len(spec.block_sizes))[labels]
    features = one_hot + rng.normal(0.0, spec.noise, size=one_hot.shape) if spec.noise > 0 else one_hot

    graph = Graph.from_edges(n, edges)
    name = f"sbm-{'x'.join(str(b) for b in spec.block_sizes)}-seed{spec.seed}"
    return Dataset(features=np.ascontiguousarray(features), affinity=graph, labels=labels, name=name)


def random_graph(n: int, p: float, seed: int, weighted: bool = False) -> Graph:
    """Erdős–Rényi G(n, p); weighted graphs draw weights uniformly from [0.1, 2)."""
    rng = np.random.default_rng(seed)
    upper = np.triu(rng.random((n, n)) < p, k=1)
    edges = np.argwhere(upper)
    weights = rng.uniform(0.1, 2.0, size=len(edges)) if weighted else None
    return Graph.from_edges(n, edges, weights)


# ============================================================================
# WRITERS
# ============================================================================


def save_embeddings(h: np.ndarray, path: str | Path) -> Path:
    """
    Write a matrix as TSV: header "node h0 h1 ...", one node per row, 17 significant digits.

    Args:
        h: n x k matrix
        path: Output file

    Returns:
        Path written
    """
    h = as_dense(h, "embeddings")
    frame = pd.DataFrame(h, columns=[f"h{j}" for j in range(h.shape[1])])
    frame.index.name = "node"
    frame.to_csv(path, sep="\t", float_format="%.17g")
    return Path(path)


def save_affinity(a, path: str | Path) -> Path:
    """Write a (dense or sparse) affinity matrix in the embeddings TSV format."""
    return save_embeddings(as_dense(a, "affinity"), path)


def load_matrix_tsv(path: str | Path) -> np.ndarray:
    """Read a matrix written by save_embeddings / save_affinity."""
    frame = pd.read_csv(path, sep="\t", index_col="node", float_precision="round_trip")
    return np.ascontiguousarray(frame.to_numpy(dtype=np.float64)).reshape(len(frame), frame.shape[1])


def save_edge_list(g: Graph, path: str | Path) -> Path:
    """Write each undirected edge once as "i j weight"."""
    upper = sp.triu(g.affinity, k=1).tocoo()
    order = np.lexsort((upper.col, upper.row))
    lines = [f"# nodes: {g.n}"]
    lines += [f"{int(upper.row[i])} {int(upper.col[i])} {float(upper.data[i])!r}" for i in order]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
    return Path(path)


def save_dataset(ds: Dataset, directory: str | Path) -> dict[str, Path]:
    """Write features.csv, edges.txt and labels.csv for a dataset."""
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    written = {"features": out / "features.csv"}
    pd.DataFrame(ds.features).to_csv(written["features"], header=False, index=False, float_format="%.17g")
    if ds.affinity is not None:
        written["edges"] = save_edge_list(ds.affinity, out / "edges.txt")
    if ds.labels is not None:
        written["labels"] = out / "labels.csv"
        pd.Series(ds.labels).to_csv(written["labels"], header=False, index=False)
    return written
